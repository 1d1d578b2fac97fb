#pragma once

#include <cstdint>
#include <vector>

#include "lcnn/matrix.hpp"
#include "lcnn/network.hpp"
#include "lcnn/objective.hpp"
#include "lcnn/rng.hpp"

#include "json.hpp"

namespace lcnn {

struct TrainSchedule {
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = 0.05;
  double lr_decay = 1.0;  // multiplicative per epoch, in (0, 1]
  std::uint64_t shuffle_seed = 1;
  // When false, skip the per-epoch full-set objective/accuracy evaluation
  // (gradient telemetry is still recorded).
  bool telemetry = true;
};

TrainSchedule schedule_from_json(const nlohmann::json& j);
nlohmann::json schedule_to_json(const TrainSchedule& s);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
};

// Exact gradient of total_objective with respect to every parameter. The
// trace must come from forward() on the same net and batch (including any
// dropout mask, which the gradient respects).
Gradients backward(const Network& net, const ForwardTrace& trace, const ObjectiveSpec& spec,
                   const Targets& targets, double penalty_scale = 1.0);

// Central finite differences against backward on every parameter, or on a
// seeded subset of at least 200 parameters for larger nets. Returns the max
// of |g_a - g_n| / max(1e-8, |g_a| + |g_n|). Parameters feeding a relu unit
// whose pre-activation comes within 1e-4 of 0 on the batch are excluded.
double gradient_check(const Network& net, const ObjectiveSpec& spec, const Matrix& batch,
                      const Targets& targets, double step = 1e-5, std::uint64_t subset_seed = 0);

// Inverted dropout over the last hidden layer: entries 0 with probability
// rate, otherwise 1/(1-rate).
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

// Re-derives the trace with a fresh mask on the last hidden layer; rate 0
// returns the trace unchanged.
ForwardTrace apply_dropout(const Network& net, const ForwardTrace& trace, double rate, Rng& rng);

// Mean absolute entry of one layer's weight gradient.
double mean_abs_gradient(const Gradients& grads, std::size_t layer);

struct EpochRecord {
  std::size_t epoch = 0;
  ObjectiveBreakdown objective;
  double train_accuracy = 0.0;
  // Validation score: accuracy for classifiers, reconstruction error for
  // autoencoders.
  double val_accuracy = 0.0;
  bool has_validation = false;
  std::vector<double> layer_grad_means;  // per weight layer, averaged over the epoch's batches
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  Network final_net;
  bool diverged = false;
  std::size_t completed_epochs = 0;
  double total_seconds = 0.0;
};

nlohmann::json train_report_to_json(const TrainReport& report, bool include_timing = true,
                                    bool include_network = false);
void train_report_to_csv(const TrainReport& report, const std::string& path);

// Plain minibatch SGD, seeded shuffle per epoch, w <- w - lr * g. Divergence
// (non-finite objective) stops training; the report keeps the last finite
// network and sets the diverged flag.
TrainReport sgd_train(Network net, const Matrix& x_train, const Targets& y_train,
                      const ObjectiveSpec& spec, const TrainSchedule& schedule,
                      const Matrix* x_val = nullptr, const std::vector<int>* val_labels = nullptr);

}  // namespace lcnn
