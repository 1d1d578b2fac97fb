#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcnn/matrix.hpp"
#include "lcnn/network.hpp"
#include "lcnn/training.hpp"

#include "json.hpp"

namespace lcnn {

// Logistic encoder + logistic decoder, stored as a two-layer network so the
// serialization envelope is shared.
struct Autoencoder {
  Network net;

  std::size_t visible() const { return net.input_width(); }
  std::size_t hidden() const { return net.config.layer_widths[1]; }
  const Matrix& encoder_weights() const { return net.weights[0]; }
  const Matrix& decoder_weights() const { return net.weights[1]; }
};

Autoencoder init_autoencoder(std::size_t visible, std::size_t hidden, std::uint64_t seed);

struct SaeTrace {
  Matrix hidden_pre, hidden, recon_pre, recon;
};

// u = logistic(W_e x + b_e), xhat = logistic(W_d u + b_d). Inputs must lie in
// [0, 1].
SaeTrace sae_forward(const Autoencoder& ae, const Matrix& x);

struct SaeBreakdown {
  double recon = 0.0;  // 0.5 * sum ||x - xhat||^2
  double kl = 0.0;     // C * sum KL(rho || u)
  double lcnn = 0.0;   // (D/2) * sum of squared decoder pre-activations
  double total = 0.0;
};

SaeBreakdown sae_objective(const Autoencoder& ae, const Matrix& x, double c, double d, double rho);

Gradients sae_backward(const Autoencoder& ae, const SaeTrace& trace, const Matrix& x, double c,
                       double d, double rho);

double sae_gradient_check(const Autoencoder& ae, const Matrix& x, double c, double d, double rho,
                          double step = 1e-5, std::uint64_t subset_seed = 0);

// Minibatch SGD over the literal per-sample sums of the objective. The
// report's breakdown fields carry recon / kl / lcnn evaluated on the full
// training set; train accuracy stays unset and val_accuracy holds the
// validation reconstruction error when x_val is given.
TrainReport sae_train(Autoencoder ae, const Matrix& x_train, double c, double d, double rho,
                      const TrainSchedule& schedule, const Matrix* x_val = nullptr);

Autoencoder autoencoder_from_report(const TrainReport& report);

struct Histogram {
  std::vector<double> edges;        // bins + 1 ascending edges over [-range, range]
  std::vector<std::size_t> counts;  // out-of-range values land in the end bins
};

Histogram weight_histogram(const std::vector<const Matrix*>& weights, std::size_t bins, double range);
void histogram_to_csv(const Histogram& h, const std::string& path);

// Fraction of weight entries with |w| < eps.
double sparsity_fraction(const std::vector<const Matrix*>& weights, double eps);

// One binary graymap per encoder row (min-max normalized, constant rows map
// to mid-gray 128) plus a tiled contact sheet, written under dir.
void export_filters(const Matrix& encoder_weights, std::size_t image_height,
                    std::size_t image_width, const std::string& dir);

nlohmann::json autoencoder_to_json(const Autoencoder& ae);
Autoencoder autoencoder_from_json(const nlohmann::json& j);

}  // namespace lcnn
