#include "lcnn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lcnn/error.hpp"

namespace lcnn {

std::vector<double> average_ranks(const std::vector<double>& values, bool descending) {
  const std::size_t n = values.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? values[a] > values[b] : values[a] < values[b];
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw shape_error("wilcoxon: unequal sample sizes");
  std::vector<double> diffs;
  diffs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw stat_error("wilcoxon undefined: all differences are zero");
  if (diffs.size() < 5)
    throw stat_error("wilcoxon needs at least 5 nonzero differences, have " +
                     std::to_string(diffs.size()));

  const std::size_t n = diffs.size();
  std::vector<double> abs_d(n);
  for (std::size_t i = 0; i < n; ++i) abs_d[i] = std::fabs(diffs[i]);
  const std::vector<double> ranks = average_ranks(abs_d, false);

  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < n; ++i) (diffs[i] > 0 ? w_plus : w_minus) += ranks[i];

  WilcoxonResult res;
  res.n_effective = n;
  res.statistic = std::min(w_plus, w_minus);

  if (n <= 12) {
    // Doubled ranks are exact integers even with ties; count sign assignments
    // whose min(W+, W-) does not exceed the observed statistic.
    std::vector<long> r2(n);
    long total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r2[i] = std::lround(2.0 * ranks[i]);
      total += r2[i];
    }
    std::vector<std::uint64_t> ways(static_cast<std::size_t>(total) + 1, 0);
    ways[0] = 1;
    for (std::size_t i = 0; i < n; ++i)
      for (long s = total; s >= r2[i]; --s)
        ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - r2[i])];
    const long obs2 = std::lround(2.0 * res.statistic);
    std::uint64_t count = 0;
    for (long s = 0; s <= total; ++s)
      if (std::min(s, total - s) <= obs2) count += ways[static_cast<std::size_t>(s)];
    res.p_value = static_cast<double>(count) / std::pow(2.0, static_cast<double>(n));
    res.exact = true;
  } else {
    const double dn = static_cast<double>(n);
    double tie_term = 0.0;
    std::vector<double> sorted = abs_d;
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += (t * t * t - t) / 48.0;
      i = j + 1;
    }
    const double mu = dn * (dn + 1.0) / 4.0;
    const double sigma = std::sqrt(dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term);
    const double z = (res.statistic - mu) / sigma;
    res.p_value = std::erfc(std::fabs(z) / std::sqrt(2.0));
    res.exact = false;
  }
  res.significant_at_05 = res.p_value < 0.05;
  return res;
}

namespace {

// Regularized incomplete gamma by series (P) and continued fraction (Q).
double gamma_series_p(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_cf_q(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi_squared_upper_tail(double x, std::size_t dof) {
  if (dof == 0) throw domain_error("chi-squared needs at least one degree of freedom");
  if (x <= 0.0) return 1.0;
  const double a = static_cast<double>(dof) / 2.0, y = x / 2.0;
  if (y < a + 1.0) return 1.0 - gamma_series_p(a, y);
  return gamma_cf_q(a, y);
}

FriedmanResult friedman_test(const Matrix& scores) {
  if (scores.rows < 2 || scores.cols < 2)
    throw stat_error("friedman needs at least 2 datasets and 2 methods");
  for (double v : scores.data)
    if (!std::isfinite(v)) throw data_error("friedman: incomplete score matrix");

  const std::size_t n = scores.rows, k = scores.cols;
  std::vector<double> mean_rank(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(scores.row_ptr(i), scores.row_ptr(i) + k);
    const std::vector<double> ranks = average_ranks(row, true);
    for (std::size_t j = 0; j < k; ++j) mean_rank[j] += ranks[j];
  }
  for (double& r : mean_rank) r /= static_cast<double>(n);

  const double dk = static_cast<double>(k), dn = static_cast<double>(n);
  double sum_sq = 0.0;
  for (double r : mean_rank) sum_sq += r * r;
  FriedmanResult res;
  res.datasets = n;
  res.methods = k;
  res.chi_squared = 12.0 * dn / (dk * (dk + 1.0)) * (sum_sq - dk * (dk + 1.0) * (dk + 1.0) / 4.0);
  res.p_value = chi_squared_upper_tail(res.chi_squared, k - 1);
  return res;
}

std::string format_p_value(double p) {
  if (p < 1e-12) return "<1e-12";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", p);
  return buf;
}

}  // namespace lcnn
