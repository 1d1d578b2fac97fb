#include "lcnn/objective.hpp"

#include <algorithm>
#include <cmath>

#include "lcnn/error.hpp"

namespace lcnn {

void validate_spec(const ObjectiveSpec& spec, TaskKind task) {
  if (spec.weight_decay < 0 || spec.lcnn_d < 0 || spec.kl_c < 0)
    throw config_error("penalty coefficients must be nonnegative");
  if (spec.kl_rho <= 0 || spec.kl_rho >= 1) throw config_error("kl_rho must lie in (0,1)");
  if (spec.dropout_rate < 0 || spec.dropout_rate >= 1)
    throw spec_error("dropout rate must lie in [0,1)");
  if (spec.target_magnitude <= 0 || spec.target_magnitude >= 1)
    throw config_error("target magnitude must lie in (0,1)");
  if (task == TaskKind::Classifier && spec.kl_c > 0)
    throw spec_error("KL sparsity is only legal for autoencoder training");
  if (task == TaskKind::Autoencoder && spec.dropout_rate > 0)
    throw spec_error("dropout is not part of the autoencoder objective");
}

std::string spec_label(const ObjectiveSpec& spec) {
  std::string s = spec.loss == LossKind::SquaredError ? "SE" : "S";
  if (spec.weight_decay > 0) s += "+W";
  if (spec.lcnn_mode == LcnnMode::LastLayer && spec.lcnn_d > 0) s += "+LC-L";
  if (spec.lcnn_mode == LcnnMode::AllLayers && spec.lcnn_d > 0) s += "+LC-A";
  if (spec.dropout_rate > 0) s += "+D";
  if (spec.kl_c > 0) s += "+KL";
  return s;
}

namespace {

double scalar_from(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_boolean()) {
    if (v.get<bool>()) throw config_error(std::string(key) + " needs a numeric coefficient");
    return 0.0;
  }
  if (!v.is_number()) throw config_error(std::string(key) + " must be a number or false");
  return v.get<double>();
}

}  // namespace

ObjectiveSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw config_error("objective spec must be a JSON object");
  if (j.contains("BN")) {
    const auto& bn = j.at("BN");
    const bool off = (bn.is_boolean() && !bn.get<bool>()) || (bn.is_number() && bn.get<double>() == 0.0) || bn.is_null();
    if (!off) throw spec_error("batch normalization is rejected by this objective");
  }
  ObjectiveSpec spec;
  bool loss_set = false;
  if (j.contains("loss")) {
    const std::string name = j.at("loss").get<std::string>();
    if (name == "SE")
      spec.loss = LossKind::SquaredError;
    else if (name == "S")
      spec.loss = LossKind::SoftmaxCrossEntropy;
    else
      throw config_error("loss must be \"SE\" or \"S\"");
    loss_set = true;
  }
  if (j.value("SE", false)) {
    spec.loss = LossKind::SquaredError;
    loss_set = true;
  }
  if (j.value("S", false)) {
    if (loss_set && spec.loss == LossKind::SquaredError)
      throw config_error("conflicting loss selection");
    spec.loss = LossKind::SoftmaxCrossEntropy;
    loss_set = true;
  }
  if (!loss_set) throw config_error("objective spec needs a loss (\"SE\" or \"S\")");
  if (j.contains("W")) spec.weight_decay = scalar_from(j, "W");
  double lcl = j.contains("LC-L") ? scalar_from(j, "LC-L") : 0.0;
  double lca = j.contains("LC-A") ? scalar_from(j, "LC-A") : 0.0;
  if (lcl > 0 && lca > 0) throw config_error("LC-L and LC-A are mutually exclusive");
  if (lcl > 0) {
    spec.lcnn_mode = LcnnMode::LastLayer;
    spec.lcnn_d = lcl;
  } else if (lca > 0) {
    spec.lcnn_mode = LcnnMode::AllLayers;
    spec.lcnn_d = lca;
  }
  if (j.contains("D")) spec.dropout_rate = scalar_from(j, "D");
  if (j.contains("kl_C")) spec.kl_c = scalar_from(j, "kl_C");
  if (j.contains("kl_rho")) spec.kl_rho = j.at("kl_rho").get<double>();
  if (j.contains("t")) spec.target_magnitude = j.at("t").get<double>();
  return spec;
}

nlohmann::json spec_to_json(const ObjectiveSpec& spec) {
  nlohmann::json j;
  j[spec.loss == LossKind::SquaredError ? "SE" : "S"] = true;
  if (spec.weight_decay > 0) j["W"] = spec.weight_decay;
  if (spec.lcnn_d > 0 && spec.lcnn_mode == LcnnMode::LastLayer) j["LC-L"] = spec.lcnn_d;
  if (spec.lcnn_d > 0 && spec.lcnn_mode == LcnnMode::AllLayers) j["LC-A"] = spec.lcnn_d;
  if (spec.dropout_rate > 0) j["D"] = spec.dropout_rate;
  if (spec.kl_c > 0) {
    j["kl_C"] = spec.kl_c;
    j["kl_rho"] = spec.kl_rho;
  }
  j["t"] = spec.target_magnitude;
  return j;
}

double empirical_error_squared(const Matrix& outputs, const Matrix& targets) {
  if (!outputs.same_shape(targets)) throw shape_error("squared error: shape mismatch");
  if (outputs.rows == 0) throw data_error("squared error: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const double e = targets.data[i] - outputs.data[i];
    acc += e * e;
  }
  return acc / (2.0 * static_cast<double>(outputs.rows));
}

double empirical_error_softmax(const Matrix& logits, const std::vector<int>& labels) {
  if (logits.rows != labels.size()) throw shape_error("softmax loss: label count mismatch");
  if (logits.rows == 0) throw data_error("softmax loss: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= logits.cols)
      throw data_error("softmax loss: label out of range");
    const double* row = logits.row_ptr(i);
    double mx = row[0];
    for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) z += std::exp(row[j] - mx);
    acc += std::log(z) - (row[static_cast<std::size_t>(label)] - mx);
  }
  return acc / static_cast<double>(logits.rows);
}

double lcnn_penalty_last(const ForwardTrace& trace) {
  if (trace.preacts.empty()) throw shape_error("trace has no output layer");
  return sum_squares(trace.preacts.back());
}

double lcnn_penalty_all(const ForwardTrace& trace) {
  if (trace.preacts.empty()) throw shape_error("trace has no layers");
  double acc = 0.0;
  for (const Matrix& a : trace.preacts) acc += sum_squares(a);
  return acc;
}

double l2_penalty(const Network& net) {
  double acc = 0.0;
  for (const Matrix& w : net.weights) acc += sum_squares(w);
  return 0.5 * acc;
}

double kl_sparsity_penalty(const Matrix& u, double rho) {
  if (rho <= 0 || rho >= 1) throw config_error("kl_rho must lie in (0,1)");
  double acc = 0.0;
  for (double v : u.data) {
    const double q = std::clamp(v, 1e-12, 1.0 - 1e-12);
    acc += rho * std::log(rho / q) + (1.0 - rho) * std::log((1.0 - rho) / (1.0 - q));
  }
  return acc;
}

ObjectiveBreakdown total_objective(const ObjectiveSpec& spec, const Network& net,
                                   const ForwardTrace& trace, const Targets& targets,
                                   double penalty_scale) {
  validate_spec(spec, TaskKind::Classifier);
  const ActivationKind out = net.config.activations.back();
  if (spec.loss == LossKind::SquaredError && out == ActivationKind::Softmax)
    throw config_error("squared error does not pair with a softmax output");
  if (spec.loss == LossKind::SoftmaxCrossEntropy && out != ActivationKind::Softmax)
    throw config_error("softmax cross-entropy needs a softmax output layer");
  ObjectiveBreakdown b;
  if (spec.loss == LossKind::SquaredError)
    b.empirical = empirical_error_squared(trace.output(), targets.values);
  else
    b.empirical = empirical_error_softmax(trace.output_preact(), targets.labels);
  if (spec.weight_decay > 0) b.l2 = spec.weight_decay * l2_penalty(net);
  if (spec.lcnn_d > 0 && spec.lcnn_mode != LcnnMode::Off) {
    const double p = spec.lcnn_mode == LcnnMode::LastLayer ? lcnn_penalty_last(trace)
                                                           : lcnn_penalty_all(trace);
    b.lcnn = 0.5 * spec.lcnn_d * penalty_scale * p;
  }
  b.total = b.empirical + b.l2 + b.lcnn + b.kl;
  return b;
}

}  // namespace lcnn
