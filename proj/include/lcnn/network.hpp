#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcnn/matrix.hpp"

#include "json.hpp"

namespace lcnn {

struct NetworkConfig {
  // layer_widths = [input, hidden..., output]; activations has one entry per
  // weight layer, so activations.size() == layer_widths.size() - 1.
  std::vector<std::size_t> layer_widths;
  std::vector<ActivationKind> activations;
  std::uint64_t seed = 1;
};

NetworkConfig make_config(const std::vector<std::size_t>& widths, ActivationKind hidden,
                          ActivationKind output, std::uint64_t seed);

struct Network {
  NetworkConfig config;
  std::vector<Matrix> weights;  // weights[h] is layer_widths[h+1] x layer_widths[h]
  std::vector<Matrix> biases;   // biases[h] is 1 x layer_widths[h+1]

  std::size_t depth() const { return weights.size(); }
  std::size_t input_width() const { return config.layer_widths.front(); }
  std::size_t output_width() const { return config.layer_widths.back(); }
  std::size_t penultimate_width() const { return config.layer_widths[config.layer_widths.size() - 2]; }
  std::size_t parameter_count() const;
};

// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
Network init_network(const NetworkConfig& config);

struct ForwardTrace {
  std::vector<Matrix> preacts;      // preacts[h]: batch x layer_widths[h+1]
  std::vector<Matrix> activations;  // activations[0] = input, activations[h+1] = f(preacts[h])
  // Inverted-dropout mask over the last hidden layer's activations; empty when
  // inactive. mask_layer indexes into activations.
  Matrix dropout_mask;
  std::size_t mask_layer = 0;

  std::size_t batch_size() const { return activations.empty() ? 0 : activations.front().rows; }
  const Matrix& output() const { return activations.back(); }
  const Matrix& output_preact() const { return preacts.back(); }
};

ForwardTrace forward(const Network& net, const Matrix& batch, const Matrix* penultimate_mask = nullptr);

// Binary (single output): net >= 0 maps to +1, else -1. Multiclass: 0-based
// argmax, ties broken toward the lowest index.
std::vector<int> predict(const Network& net, const Matrix& batch);
std::vector<int> predict_from_trace(const ForwardTrace& trace);

// Fraction of rows whose prediction matches the dense label index.
double accuracy(const Network& net, const Matrix& batch, const std::vector<int>& labels);

// Penultimate activations with a constant-1 column appended, so the output
// layer's bias folds into an augmented weight vector.
Matrix augmented_penultimate(const ForwardTrace& trace);
// Rows beta_j = [w_j, b_j] of the output layer, shape K x (penultimate+1).
Matrix output_beta(const Network& net);

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace lcnn
