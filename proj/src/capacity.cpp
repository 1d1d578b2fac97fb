#include "lcnn/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "lcnn/error.hpp"

namespace lcnn {

BigInt dichotomy_count(std::size_t m, std::size_t n) {
  if (m < 1 || n < 1) throw domain_error("dichotomy_count needs M >= 1 and n >= 1");
  if (m < n + 1) return BigInt(1) << m;
  BigInt total = 0, binom = 1;  // binom = C(m-1, i), starting at i = 0
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      binom *= static_cast<unsigned long>(m - i);
      binom /= static_cast<unsigned long>(i);
    }
    total += binom;
  }
  return 2 * total;
}

double geometric_margin(const Matrix& augmented, const std::vector<double>& beta) {
  if (augmented.rows == 0) throw data_error("geometric margin: no samples");
  if (beta.size() != augmented.cols) throw shape_error("geometric margin: beta size mismatch");
  double norm_sq = 0.0;
  for (double v : beta) norm_sq += v * v;
  if (norm_sq == 0.0) throw degenerate_error("geometric margin: zero classifier");
  const double norm = std::sqrt(norm_sq);
  double best = 1e300;
  for (std::size_t i = 0; i < augmented.rows; ++i) {
    const double* row = augmented.row_ptr(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < augmented.cols; ++j) dot += beta[j] * row[j];
    best = std::min(best, std::fabs(dot) / norm);
  }
  return best;
}

double enclosing_radius(const Matrix& augmented) {
  if (augmented.rows == 0) throw data_error("enclosing radius: no samples");
  double best = 0.0;
  for (std::size_t i = 0; i < augmented.rows; ++i) best = std::max(best, row_norm(augmented, i));
  return best;
}

double theta_from_target(ActivationKind kind, double t) {
  switch (kind) {
    case ActivationKind::Tanh:
      if (t <= -1 || t >= 1) throw domain_error("tanh target must lie in (-1,1)");
      return std::atanh(t);
    case ActivationKind::Logistic:
      if (t <= 0 || t >= 1) throw domain_error("logistic target must lie in (0,1)");
      return std::log(t / (1.0 - t));
    case ActivationKind::Identity:
      return t;
    case ActivationKind::Relu:
    case ActivationKind::Softmax:
      throw unsupported_error("no usable inverse for this activation");
  }
  throw error("unknown activation kind");
}

double range_margin(const Matrix& outputs, std::size_t column, const std::vector<double>& w) {
  if (outputs.rows == 0) throw data_error("range margin: no samples");
  if (column >= outputs.cols) throw shape_error("range margin: column out of range");
  double norm_sq = 0.0;
  for (double v : w) norm_sq += v * v;
  if (norm_sq == 0.0) throw degenerate_error("range margin: zero classifier");
  double lo = outputs(0, column), hi = lo;
  for (std::size_t i = 1; i < outputs.rows; ++i) {
    lo = std::min(lo, outputs(i, column));
    hi = std::max(hi, outputs(i, column));
  }
  return (hi - lo) / std::sqrt(norm_sq);
}

CapacityReport vc_bound(const Network& net, const ForwardTrace& trace, double t) {
  if (trace.preacts.empty()) throw shape_error("vc_bound: trace has no output layer");
  CapacityReport rep;
  rep.m = trace.batch_size();
  rep.n = net.penultimate_width();
  const Matrix aug = augmented_penultimate(trace);
  rep.r1 = enclosing_radius(aug);

  const ActivationKind out_kind = net.config.activations.back();
  if (out_kind == ActivationKind::Softmax || out_kind == ActivationKind::Relu) {
    // No usable inverse; theta = 1 is the conservative stand-in.
    rep.theta = 1.0;
    rep.theta_available = false;
  } else {
    rep.theta = theta_from_target(out_kind, t);
    rep.theta_available = true;
  }

  const Matrix beta = output_beta(net);
  const Matrix& nets = trace.output_preact();
  const Matrix& outs = trace.output();
  const double n_cap = static_cast<double>(rep.n);
  for (std::size_t j = 0; j < beta.rows; ++j) {
    ClassCapacity cc;
    std::vector<double> beta_j(beta.row_ptr(j), beta.row_ptr(j) + beta.cols);
    cc.d = geometric_margin(aug, beta_j);
    std::vector<double> w_j(net.weights.back().row_ptr(j),
                            net.weights.back().row_ptr(j) + net.weights.back().cols);
    cc.range_margin = range_margin(outs, j, w_j);
    for (std::size_t i = 0; i < nets.rows; ++i) cc.sum_sq_net += nets(i, j) * nets(i, j);
    if (cc.d > 0) {
      cc.d_min = cc.d;
      cc.c_prime = rep.r1 * rep.r1 /
                   (static_cast<double>(rep.m) * cc.d_min * cc.d_min * rep.theta * rep.theta);
      cc.c_bound = 4.0 * cc.c_prime;
      cc.gamma_bound = 1.0 + std::min(cc.c_bound * cc.sum_sq_net, n_cap);
    } else {
      cc.non_separable = true;
      cc.gamma_bound = 1.0 + n_cap;
    }
    rep.per_class.push_back(cc);
  }

  std::size_t headline = 0;
  for (std::size_t j = 1; j < rep.per_class.size(); ++j)
    if (rep.per_class[j].gamma_bound > rep.per_class[headline].gamma_bound) headline = j;
  const ClassCapacity& hc = rep.per_class[headline];
  rep.d = hc.d;
  rep.d_min = hc.d_min;
  rep.c_prime = hc.c_prime;
  rep.c_bound = hc.c_bound;
  rep.gamma_bound = hc.gamma_bound;
  rep.range_margin = hc.range_margin;
  for (const ClassCapacity& cc : rep.per_class) {
    rep.sum_sq_net += cc.sum_sq_net;
    rep.non_separable = rep.non_separable || cc.non_separable;
  }
  return rep;
}

nlohmann::json capacity_report_to_json(const CapacityReport& rep) {
  nlohmann::json j;
  j["M"] = rep.m;
  j["n"] = rep.n;
  j["R1"] = rep.r1;
  j["theta"] = rep.theta;
  j["theta_available"] = rep.theta_available;
  j["d"] = rep.d;
  j["d_min"] = rep.d_min;
  j["C_prime"] = rep.c_prime;
  j["C_bound"] = rep.c_bound;
  j["sum_sq_net"] = rep.sum_sq_net;
  j["gamma_bound"] = rep.gamma_bound;
  j["range_margin"] = rep.range_margin;
  j["non_separable"] = rep.non_separable;
  nlohmann::json classes = nlohmann::json::array();
  for (const ClassCapacity& cc : rep.per_class) {
    classes.push_back({{"d", cc.d},
                       {"d_min", cc.d_min},
                       {"C_prime", cc.c_prime},
                       {"C_bound", cc.c_bound},
                       {"sum_sq_net", cc.sum_sq_net},
                       {"gamma_bound", cc.gamma_bound},
                       {"range_margin", cc.range_margin},
                       {"non_separable", cc.non_separable}});
  }
  j["per_class"] = std::move(classes);
  return j;
}

bool separability_check(const Matrix& points, const std::vector<int>& labels) {
  if (points.rows != labels.size()) throw shape_error("separability: label count mismatch");
  if (points.rows == 0) throw data_error("separability: no samples");
  const std::set<int> values(labels.begin(), labels.end());
  if (values.size() != 2) throw data_error("separability needs exactly two label values");
  const int hi = *values.rbegin();

  std::vector<double> w(points.cols + 1, 0.0);  // augmented perceptron
  const std::size_t cap = 50000 + 1000 * points.rows;
  std::size_t updates = 0;
  while (updates < cap) {
    bool clean = true;
    for (std::size_t i = 0; i < points.rows; ++i) {
      const double* row = points.row_ptr(i);
      double dot = w[points.cols];
      for (std::size_t j = 0; j < points.cols; ++j) dot += w[j] * row[j];
      const double y = labels[i] == hi ? 1.0 : -1.0;
      if (y * dot <= 0) {
        for (std::size_t j = 0; j < points.cols; ++j) w[j] += y * row[j];
        w[points.cols] += y;
        ++updates;
        clean = false;
        if (updates >= cap) break;
      }
    }
    if (clean) return true;
  }
  return false;
}

}  // namespace lcnn
