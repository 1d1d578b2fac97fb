#include "lcnn/autoencoder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "lcnn/error.hpp"
#include "lcnn/objective.hpp"

namespace lcnn {

namespace {

void validate_sae_shape(const Network& net) {
  if (net.depth() != 2 || net.config.layer_widths[0] != net.config.layer_widths[2])
    throw config_error("autoencoder must be visible-hidden-visible");
  if (net.config.activations[0] != ActivationKind::Logistic ||
      net.config.activations[1] != ActivationKind::Logistic)
    throw config_error("autoencoder uses logistic activations");
}

void check_unit_interval(const Matrix& x) {
  for (double v : x.data)
    if (!(v >= 0.0 && v <= 1.0)) throw data_error("autoencoder inputs must lie in [0,1]");
}

void check_sae_coefficients(double c, double d, double rho) {
  if (c < 0 || d < 0) throw config_error("penalty coefficients must be nonnegative");
  if (rho <= 0 || rho >= 1) throw config_error("kl_rho must lie in (0,1)");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Autoencoder init_autoencoder(std::size_t visible, std::size_t hidden, std::uint64_t seed) {
  Autoencoder ae;
  ae.net = init_network(
      make_config({visible, hidden, visible}, ActivationKind::Logistic, ActivationKind::Logistic, seed));
  return ae;
}

SaeTrace sae_forward(const Autoencoder& ae, const Matrix& x) {
  validate_sae_shape(ae.net);
  if (x.cols != ae.visible()) throw shape_error("sae_forward: input width mismatch");
  check_unit_interval(x);
  SaeTrace t;
  t.hidden_pre = add_row_broadcast(matmul_a_bt(x, ae.net.weights[0]), ae.net.biases[0]);
  t.hidden = activate(ActivationKind::Logistic, t.hidden_pre);
  t.recon_pre = add_row_broadcast(matmul_a_bt(t.hidden, ae.net.weights[1]), ae.net.biases[1]);
  t.recon = activate(ActivationKind::Logistic, t.recon_pre);
  return t;
}

SaeBreakdown sae_objective(const Autoencoder& ae, const Matrix& x, double c, double d, double rho) {
  check_sae_coefficients(c, d, rho);
  const SaeTrace t = sae_forward(ae, x);
  SaeBreakdown b;
  Matrix err = subtract(x, t.recon);
  b.recon = 0.5 * sum_squares(err);
  if (c > 0) b.kl = c * kl_sparsity_penalty(t.hidden, rho);
  if (d > 0) b.lcnn = 0.5 * d * sum_squares(t.recon_pre);
  b.total = b.recon + b.kl + b.lcnn;
  return b;
}

Gradients sae_backward(const Autoencoder& ae, const SaeTrace& t, const Matrix& x, double c,
                       double d, double rho) {
  check_sae_coefficients(c, d, rho);
  if (!t.recon.same_shape(x)) throw shape_error("sae_backward: trace does not match batch");

  // d objective / d decoder pre-activation
  Matrix g_dec = hadamard(subtract(t.recon, x), activate_derivative(ActivationKind::Logistic, t.recon_pre));
  if (d > 0) axpy_inplace(g_dec, d, t.recon_pre);

  Matrix du = matmul(g_dec, ae.net.weights[1]);
  if (c > 0) {
    for (std::size_t i = 0; i < du.size(); ++i) {
      const double u = std::clamp(t.hidden.data[i], 1e-12, 1.0 - 1e-12);
      du.data[i] += c * (-rho / u + (1.0 - rho) / (1.0 - u));
    }
  }
  Matrix g_enc = hadamard(du, activate_derivative(ActivationKind::Logistic, t.hidden_pre));

  Gradients g;
  g.weights.push_back(matmul_at_b(g_enc, x));
  g.weights.push_back(matmul_at_b(g_dec, t.hidden));
  g.biases.push_back(column_sums(g_enc));
  g.biases.push_back(column_sums(g_dec));
  return g;
}

double sae_gradient_check(const Autoencoder& ae, const Matrix& x, double c, double d, double rho,
                          double step, std::uint64_t subset_seed) {
  if (x.rows == 0) throw data_error("gradient check: empty batch");
  Autoencoder work = ae;
  const SaeTrace trace = sae_forward(work, x);
  const Gradients analytic = sae_backward(work, trace, x, c, d, rho);

  struct Slot {
    std::size_t layer, index;
    bool bias;
  };
  std::vector<Slot> slots;
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t idx = 0; idx < work.net.weights[k].size(); ++idx) slots.push_back({k, idx, false});
    for (std::size_t idx = 0; idx < work.net.biases[k].size(); ++idx) slots.push_back({k, idx, true});
  }
  constexpr std::size_t kSubset = 200;
  if (slots.size() > 2 * kSubset) {
    Rng rng(mix_seed(subset_seed, 0x5ae));
    for (std::size_t i = 0; i < kSubset; ++i)
      std::swap(slots[i], slots[i + rng.below(slots.size() - i)]);
    slots.resize(kSubset);
  }

  double worst = 0.0;
  for (const Slot& s : slots) {
    double& p = s.bias ? work.net.biases[s.layer].data[s.index] : work.net.weights[s.layer].data[s.index];
    const double orig = p;
    p = orig + step;
    const double fp = sae_objective(work, x, c, d, rho).total;
    p = orig - step;
    const double fm = sae_objective(work, x, c, d, rho).total;
    p = orig;
    const double gn = (fp - fm) / (2.0 * step);
    const double ga = s.bias ? analytic.biases[s.layer].data[s.index]
                             : analytic.weights[s.layer].data[s.index];
    worst = std::max(worst, std::fabs(ga - gn) / std::max(1e-8, std::fabs(ga) + std::fabs(gn)));
  }
  return worst;
}

TrainReport sae_train(Autoencoder ae, const Matrix& x_train, double c, double d, double rho,
                      const TrainSchedule& schedule, const Matrix* x_val) {
  validate_sae_shape(ae.net);
  check_sae_coefficients(c, d, rho);
  if (x_train.rows == 0) throw data_error("empty training set");
  check_unit_interval(x_train);
  if (schedule.batch_size == 0 || schedule.batch_size > x_train.rows)
    throw config_error("batch_size must lie in [1, M]");
  if (schedule.learning_rate <= 0) throw config_error("learning_rate must be positive");
  if (schedule.lr_decay <= 0 || schedule.lr_decay > 1) throw config_error("lr_decay must lie in (0,1]");

  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  Rng rng(schedule.shuffle_seed);
  double lr = schedule.learning_rate;
  std::vector<std::size_t> order = iota_indices(x_train.rows);
  Network last_finite = ae.net;

  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    const auto e0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    std::vector<double> grad_means(2, 0.0);
    std::size_t batches = 0;
    bool blew_up = false;
    for (std::size_t start = 0; start < order.size() && !blew_up; start += schedule.batch_size) {
      const std::size_t stop = std::min(order.size(), start + schedule.batch_size);
      Matrix xb(stop - start, x_train.cols);
      for (std::size_t i = start; i < stop; ++i) {
        const double* src = x_train.row_ptr(order[i]);
        std::copy(src, src + x_train.cols, xb.row_ptr(i - start));
      }
      try {
        const SaeTrace tr = sae_forward(ae, xb);
        const Gradients g = sae_backward(ae, tr, xb, c, d, rho);
        for (std::size_t k = 0; k < 2; ++k) {
          grad_means[k] += mean_abs_gradient(g, k);
          axpy_inplace(ae.net.weights[k], -lr, g.weights[k]);
          axpy_inplace(ae.net.biases[k], -lr, g.biases[k]);
        }
        ++batches;
      } catch (const data_error&) {
        blew_up = true;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    if (batches > 0)
      for (double& v : grad_means) v /= static_cast<double>(batches);
    rec.layer_grad_means = std::move(grad_means);
    rec.train_accuracy = std::numeric_limits<double>::quiet_NaN();
    rec.val_accuracy = std::numeric_limits<double>::quiet_NaN();

    bool params_ok = true;
    for (const Matrix& w : ae.net.weights) params_ok = params_ok && w.all_finite();
    for (const Matrix& b : ae.net.biases) params_ok = params_ok && b.all_finite();
    if (!blew_up && params_ok) {
      if (schedule.telemetry) {
        const SaeBreakdown full = sae_objective(ae, x_train, c, d, rho);
        rec.objective.empirical = full.recon;
        rec.objective.kl = full.kl;
        rec.objective.lcnn = full.lcnn;
        rec.objective.total = full.total;
        if (x_val) {
          rec.val_accuracy = sae_objective(ae, *x_val, c, d, rho).recon;
          rec.has_validation = true;
        }
        if (!std::isfinite(full.total)) blew_up = true;
      }
    } else {
      blew_up = true;
    }

    if (blew_up) {
      report.diverged = true;
      ae.net = last_finite;
      break;
    }
    rec.seconds = seconds_since(e0);
    report.epochs.push_back(std::move(rec));
    report.completed_epochs = epoch + 1;
    last_finite = ae.net;
    lr *= schedule.lr_decay;
  }

  report.final_net = std::move(ae.net);
  report.total_seconds = seconds_since(t0);
  return report;
}

Autoencoder autoencoder_from_report(const TrainReport& report) {
  Autoencoder ae;
  ae.net = report.final_net;
  validate_sae_shape(ae.net);
  return ae;
}

Histogram weight_histogram(const std::vector<const Matrix*>& weights, std::size_t bins, double range) {
  if (bins < 1) throw config_error("histogram needs at least one bin");
  if (range <= 0) throw config_error("histogram range must be positive");
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b)
    h.edges[b] = -range + 2.0 * range * static_cast<double>(b) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (const Matrix* w : weights)
    for (double v : w->data) {
      double pos = (v + range) / (2.0 * range) * static_cast<double>(bins);
      std::size_t bin = pos <= 0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(pos));
      ++h.counts[bin];
    }
  return h;
}

void histogram_to_csv(const Histogram& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << "bin_low,bin_high,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << "\n";
}

double sparsity_fraction(const std::vector<const Matrix*>& weights, double eps) {
  if (eps <= 0) throw config_error("sparsity threshold must be positive");
  std::size_t small = 0, total = 0;
  for (const Matrix* w : weights) {
    total += w->size();
    for (double v : w->data)
      if (std::fabs(v) < eps) ++small;
  }
  if (total == 0) throw data_error("no weights given");
  return static_cast<double>(small) / static_cast<double>(total);
}

namespace {

void write_pgm(const std::string& path, const std::vector<unsigned char>& pixels, std::size_t h,
               std::size_t w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write " + path);
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

std::vector<unsigned char> normalize_row(const double* row, std::size_t n) {
  double lo = row[0], hi = row[0];
  for (std::size_t i = 1; i < n; ++i) {
    lo = std::min(lo, row[i]);
    hi = std::max(hi, row[i]);
  }
  std::vector<unsigned char> px(n);
  if (hi == lo) {
    std::fill(px.begin(), px.end(), static_cast<unsigned char>(128));
    return px;
  }
  for (std::size_t i = 0; i < n; ++i)
    px[i] = static_cast<unsigned char>(std::lround((row[i] - lo) / (hi - lo) * 255.0));
  return px;
}

}  // namespace

void export_filters(const Matrix& encoder_weights, std::size_t image_height,
                    std::size_t image_width, const std::string& dir) {
  if (encoder_weights.cols != image_height * image_width)
    throw config_error("filter size does not match image dimensions");
  std::filesystem::create_directories(dir);
  const std::size_t count = encoder_weights.rows;
  std::vector<std::vector<unsigned char>> tiles;
  tiles.reserve(count);
  for (std::size_t f = 0; f < count; ++f) {
    tiles.push_back(normalize_row(encoder_weights.row_ptr(f), encoder_weights.cols));
    char name[32];
    std::snprintf(name, sizeof name, "filter_%03zu.pgm", f);
    write_pgm(dir + "/" + name, tiles.back(), image_height, image_width);
  }

  const std::size_t grid = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  const std::size_t grid_rows = (count + grid - 1) / grid;
  std::vector<unsigned char> sheet(grid_rows * image_height * grid * image_width, 0);
  const std::size_t sheet_w = grid * image_width;
  for (std::size_t f = 0; f < count; ++f) {
    const std::size_t tr = f / grid, tc = f % grid;
    for (std::size_t y = 0; y < image_height; ++y) {
      const std::size_t dst = (tr * image_height + y) * sheet_w + tc * image_width;
      std::copy(tiles[f].begin() + static_cast<std::ptrdiff_t>(y * image_width),
                tiles[f].begin() + static_cast<std::ptrdiff_t>((y + 1) * image_width),
                sheet.begin() + static_cast<std::ptrdiff_t>(dst));
    }
  }
  write_pgm(dir + "/filters_sheet.pgm", sheet, grid_rows * image_height, sheet_w);
}

Autoencoder autoencoder_from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "autoencoder") throw config_error("not an autoencoder document");
  Autoencoder ae;
  ae.net = network_from_json(j);
  validate_sae_shape(ae.net);
  return ae;
}

nlohmann::json autoencoder_to_json(const Autoencoder& ae) {
  nlohmann::json j = network_to_json(ae.net);
  j["kind"] = "autoencoder";
  return j;
}

}  // namespace lcnn
