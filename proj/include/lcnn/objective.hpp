#pragma once

#include <string>
#include <vector>

#include "lcnn/matrix.hpp"
#include "lcnn/network.hpp"

#include "json.hpp"

namespace lcnn {

enum class LossKind { SquaredError, SoftmaxCrossEntropy };
enum class LcnnMode { Off, LastLayer, AllLayers };
enum class TaskKind { Classifier, Autoencoder };

struct ObjectiveSpec {
  LossKind loss = LossKind::SquaredError;
  double weight_decay = 0.0;      // C on 0.5 * sum of squared weights
  LcnnMode lcnn_mode = LcnnMode::Off;
  double lcnn_d = 0.0;            // D on 0.5 * sum of squared pre-activations
  double kl_c = 0.0;              // autoencoder KL sparsity coefficient
  double kl_rho = 0.05;
  double dropout_rate = 0.0;
  double target_magnitude = 0.9;  // t entering theta = f^-1(t)
};

void validate_spec(const ObjectiveSpec& spec, TaskKind task);
// Canonical method label such as "SE", "S+W+LC-A", "SE+W+D".
std::string spec_label(const ObjectiveSpec& spec);
nlohmann::json spec_to_json(const ObjectiveSpec& spec);
ObjectiveSpec spec_from_json(const nlohmann::json& j);

// Targets for the empirical loss. For squared error, values holds the +-1
// coding (single column when K = 2); for softmax loss it is empty and labels
// are used directly.
struct Targets {
  Matrix values;
  std::vector<int> labels;
};

// (1 / 2M) * sum of squared differences, summed over output columns as well.
double empirical_error_squared(const Matrix& outputs, const Matrix& targets);
// (1 / M) * sum of -log softmax(logits)[label], max-subtracted.
double empirical_error_softmax(const Matrix& logits, const std::vector<int>& labels);
// Sum of squared output pre-activations over the batch and all classes.
double lcnn_penalty_last(const ForwardTrace& trace);
// Same, extended over every hidden layer as well. No 0.5 or D factor here.
double lcnn_penalty_all(const ForwardTrace& trace);
// 0.5 * sum of squared weight entries; biases excluded.
double l2_penalty(const Network& net);
// Per-sample per-neuron KL(rho || u); activations clamped to
// [1e-12, 1 - 1e-12] before the logs.
double kl_sparsity_penalty(const Matrix& u, double rho);

struct ObjectiveBreakdown {
  double empirical = 0.0;
  double l2 = 0.0;    // weight_decay * l2_penalty
  double lcnn = 0.0;  // (lcnn_d / 2) * penalty * penalty_scale
  double kl = 0.0;
  double total = 0.0;
};

// penalty_scale compensates minibatching: full M / batch size, so the batch
// estimate of the pre-activation sum matches the whole-dataset sum in
// expectation.
ObjectiveBreakdown total_objective(const ObjectiveSpec& spec, const Network& net,
                                   const ForwardTrace& trace, const Targets& targets,
                                   double penalty_scale = 1.0);

}  // namespace lcnn
