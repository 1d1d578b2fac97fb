#include "lcnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "lcnn/error.hpp"

namespace lcnn {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix onehot_rows(const std::vector<int>& labels, std::size_t k) {
  Matrix y(labels.size(), k, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k)
      throw data_error("label out of range");
    y(i, static_cast<std::size_t>(label)) = 1.0;
  }
  return y;
}

void check_targets(const Network& net, const ObjectiveSpec& spec, std::size_t batch_rows,
                   const Targets& targets) {
  if (spec.loss == LossKind::SquaredError) {
    if (targets.values.rows != batch_rows || targets.values.cols != net.output_width())
      throw shape_error("squared-error targets shape mismatch");
  } else {
    if (targets.labels.size() != batch_rows) throw shape_error("label count mismatch");
  }
}

}  // namespace

Gradients backward(const Network& net, const ForwardTrace& trace, const ObjectiveSpec& spec,
                   const Targets& targets, double penalty_scale) {
  const std::size_t depth = net.depth();
  if (trace.preacts.size() != depth || trace.activations.size() != depth + 1)
    throw shape_error("backward: trace does not match network");
  const std::size_t m = trace.batch_size();
  if (m == 0) throw data_error("backward: empty batch");
  check_targets(net, spec, m, targets);
  const double inv_m = 1.0 / static_cast<double>(m);
  const double d_scale = spec.lcnn_mode == LcnnMode::Off ? 0.0 : spec.lcnn_d * penalty_scale;
  const bool masked = trace.dropout_mask.size() > 0;

  // delta[k] = d objective / d preacts[k]
  std::vector<Matrix> delta(depth);
  const ActivationKind out_kind = net.config.activations.back();
  if (spec.loss == LossKind::SquaredError) {
    if (out_kind == ActivationKind::Softmax)
      throw config_error("squared error with a softmax output is not supported");
    Matrix err = subtract(trace.output(), targets.values);
    delta[depth - 1] = hadamard(scale(err, inv_m), activate_derivative(out_kind, trace.output_preact()));
  } else {
    if (out_kind != ActivationKind::Softmax)
      throw config_error("softmax cross-entropy needs a softmax output layer");
    Matrix p = softmax_rows(trace.output_preact());
    Matrix err = subtract(p, onehot_rows(targets.labels, p.cols));
    delta[depth - 1] = scale(err, inv_m);
  }
  if (d_scale > 0) axpy_inplace(delta[depth - 1], d_scale, trace.preacts[depth - 1]);

  for (std::size_t k = depth - 1; k-- > 0;) {
    Matrix du = matmul(delta[k + 1], net.weights[k + 1]);
    if (masked && k == depth - 2) du = hadamard(du, trace.dropout_mask);
    delta[k] = hadamard(du, activate_derivative(net.config.activations[k], trace.preacts[k]));
    if (d_scale > 0 && spec.lcnn_mode == LcnnMode::AllLayers)
      axpy_inplace(delta[k], d_scale, trace.preacts[k]);
  }

  Gradients g;
  g.weights.reserve(depth);
  g.biases.reserve(depth);
  for (std::size_t k = 0; k < depth; ++k) {
    Matrix gw = matmul_at_b(delta[k], trace.activations[k]);
    if (spec.weight_decay > 0) axpy_inplace(gw, spec.weight_decay, net.weights[k]);
    g.weights.push_back(std::move(gw));
    g.biases.push_back(column_sums(delta[k]));
  }
  return g;
}

double gradient_check(const Network& net, const ObjectiveSpec& spec, const Matrix& batch,
                      const Targets& targets, double step, std::uint64_t subset_seed) {
  if (batch.rows == 0) throw data_error("gradient check: empty batch");
  ObjectiveSpec checked = spec;
  checked.dropout_rate = 0.0;  // stochastic; verified via its expectation property instead

  Network work = net;
  const ForwardTrace trace = forward(work, batch);
  const Gradients analytic = backward(work, trace, checked, targets);

  struct Slot {
    std::size_t layer, index;
    bool bias;
  };
  std::vector<Slot> slots;
  for (std::size_t k = 0; k < work.depth(); ++k) {
    const bool relu = work.config.activations[k] == ActivationKind::Relu;
    std::vector<bool> excluded(work.weights[k].rows, false);
    if (relu) {
      for (std::size_t j = 0; j < work.weights[k].rows; ++j) {
        double closest = 1e300;
        for (std::size_t i = 0; i < trace.preacts[k].rows; ++i)
          closest = std::min(closest, std::fabs(trace.preacts[k](i, j)));
        excluded[j] = closest < 1e-4;
      }
    }
    for (std::size_t idx = 0; idx < work.weights[k].size(); ++idx)
      if (!excluded[idx / work.weights[k].cols]) slots.push_back({k, idx, false});
    for (std::size_t idx = 0; idx < work.biases[k].size(); ++idx)
      if (!excluded[idx]) slots.push_back({k, idx, true});
  }

  constexpr std::size_t kSubset = 200;
  if (slots.size() > 2 * kSubset) {
    Rng rng(mix_seed(subset_seed, 0x9c0de));
    for (std::size_t i = 0; i < kSubset; ++i)
      std::swap(slots[i], slots[i + rng.below(slots.size() - i)]);
    slots.resize(kSubset);
  }

  auto eval = [&]() { return total_objective(checked, work, forward(work, batch), targets).total; };
  double worst = 0.0;
  for (const Slot& s : slots) {
    double& p = s.bias ? work.biases[s.layer].data[s.index] : work.weights[s.layer].data[s.index];
    const double orig = p;
    p = orig + step;
    const double fp = eval();
    p = orig - step;
    const double fm = eval();
    p = orig;
    const double gn = (fp - fm) / (2.0 * step);
    const double ga = s.bias ? analytic.biases[s.layer].data[s.index]
                             : analytic.weights[s.layer].data[s.index];
    const double rel = std::fabs(ga - gn) / std::max(1e-8, std::fabs(ga) + std::fabs(gn));
    worst = std::max(worst, rel);
  }
  return worst;
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  if (rate < 0 || rate >= 1) throw spec_error("dropout rate must lie in [0,1)");
  Matrix mask(rows, cols, 1.0);
  if (rate == 0) return mask;
  const double keep = 1.0 - rate;
  for (double& v : mask.data) v = rng.uniform01() < rate ? 0.0 : 1.0 / keep;
  return mask;
}

ForwardTrace apply_dropout(const Network& net, const ForwardTrace& trace, double rate, Rng& rng) {
  if (rate < 0 || rate >= 1) throw spec_error("dropout rate must lie in [0,1)");
  if (rate == 0) return trace;
  if (net.depth() < 2) throw config_error("dropout needs a hidden layer");
  const Matrix& input = trace.activations.front();
  Matrix mask = dropout_mask(input.rows, net.penultimate_width(), rate, rng);
  return forward(net, input, &mask);
}

double mean_abs_gradient(const Gradients& grads, std::size_t layer) {
  if (layer >= grads.weights.size()) throw shape_error("gradient layer index out of range");
  const Matrix& g = grads.weights[layer];
  if (g.size() == 0) return 0.0;
  return sum_abs(g) / static_cast<double>(g.size());
}

TrainSchedule schedule_from_json(const nlohmann::json& j) {
  TrainSchedule s;
  s.epochs = j.value("epochs", s.epochs);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.learning_rate = j.value("learning_rate", s.learning_rate);
  s.lr_decay = j.value("lr_decay", s.lr_decay);
  s.shuffle_seed = j.value("shuffle_seed", s.shuffle_seed);
  s.telemetry = j.value("telemetry", s.telemetry);
  return s;
}

nlohmann::json schedule_to_json(const TrainSchedule& s) {
  nlohmann::json j;
  j["epochs"] = s.epochs;
  j["batch_size"] = s.batch_size;
  j["learning_rate"] = s.learning_rate;
  j["lr_decay"] = s.lr_decay;
  j["shuffle_seed"] = s.shuffle_seed;
  j["telemetry"] = s.telemetry;
  return j;
}

namespace {

Targets gather_targets(const Targets& y, const std::vector<std::size_t>& rows, bool squared) {
  Targets out;
  if (squared) {
    out.values = Matrix(rows.size(), y.values.cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < y.values.cols; ++j) out.values(i, j) = y.values(rows[i], j);
  }
  if (!y.labels.empty()) {
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) out.labels.push_back(y.labels[r]);
  }
  return out;
}

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), x.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = x.row_ptr(rows[i]);
    std::copy(src, src + x.cols, out.row_ptr(i));
  }
  return out;
}

double trace_accuracy(const ForwardTrace& trace, const std::vector<int>& labels) {
  const std::vector<int> preds = predict_from_trace(trace);
  const bool binary = trace.output().cols == 1;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int want = binary ? (labels[i] == 1 ? 1 : -1) : labels[i];
    if (preds[i] == want) ++hits;
  }
  return labels.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(labels.size());
}

bool network_finite(const Network& net) {
  for (const Matrix& w : net.weights)
    if (!w.all_finite()) return false;
  for (const Matrix& b : net.biases)
    if (!b.all_finite()) return false;
  return true;
}

}  // namespace

TrainReport sgd_train(Network net, const Matrix& x_train, const Targets& y_train,
                      const ObjectiveSpec& spec, const TrainSchedule& schedule,
                      const Matrix* x_val, const std::vector<int>* val_labels) {
  validate_spec(spec, TaskKind::Classifier);
  if (x_train.rows == 0) throw data_error("empty training set");
  if (!x_train.all_finite()) throw data_error("non-finite training features");
  if (schedule.batch_size == 0 || schedule.batch_size > x_train.rows)
    throw config_error("batch_size must lie in [1, M]");
  if (schedule.learning_rate <= 0) throw config_error("learning_rate must be positive");
  if (schedule.lr_decay <= 0 || schedule.lr_decay > 1) throw config_error("lr_decay must lie in (0,1]");
  check_targets(net, spec, x_train.rows, y_train);
  if (spec.dropout_rate > 0 && net.depth() < 2)
    throw config_error("dropout needs a hidden layer");
  if ((x_val == nullptr) != (val_labels == nullptr))
    throw config_error("validation features and labels must come together");

  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  Rng rng(schedule.shuffle_seed);
  double lr = schedule.learning_rate;
  const double full_m = static_cast<double>(x_train.rows);
  const bool squared = spec.loss == LossKind::SquaredError;
  std::vector<std::size_t> order = iota_indices(x_train.rows);
  Network last_finite = net;

  for (std::size_t epoch = 0; epoch < schedule.epochs; ++epoch) {
    const auto e0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    std::vector<double> grad_means(net.depth(), 0.0);
    std::size_t batches = 0;
    bool blew_up = false;
    for (std::size_t start = 0; start < order.size() && !blew_up; start += schedule.batch_size) {
      const std::size_t stop = std::min(order.size(), start + schedule.batch_size);
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(stop));
      const Matrix xb = gather_rows(x_train, rows);
      const Targets yb = gather_targets(y_train, rows, squared);
      try {
        ForwardTrace tr;
        if (spec.dropout_rate > 0) {
          Matrix mask = dropout_mask(xb.rows, net.penultimate_width(), spec.dropout_rate, rng);
          tr = forward(net, xb, &mask);
        } else {
          tr = forward(net, xb);
        }
        const Gradients g = backward(net, tr, spec, yb, full_m / static_cast<double>(xb.rows));
        for (std::size_t k = 0; k < net.depth(); ++k) {
          grad_means[k] += mean_abs_gradient(g, k);
          axpy_inplace(net.weights[k], -lr, g.weights[k]);
          axpy_inplace(net.biases[k], -lr, g.biases[k]);
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

    if (!blew_up && network_finite(net)) {
      if (schedule.telemetry) {
        const ForwardTrace full = forward(net, x_train);
        rec.objective = total_objective(spec, net, full, y_train);
        rec.train_accuracy = trace_accuracy(full, y_train.labels);
        if (x_val) {
          rec.val_accuracy = accuracy(net, *x_val, *val_labels);
          rec.has_validation = true;
        }
        if (!std::isfinite(rec.objective.total)) blew_up = true;
      }
    } else {
      blew_up = true;
    }

    if (blew_up) {
      report.diverged = true;
      net = last_finite;
      break;
    }
    rec.seconds = seconds_since(e0);
    report.epochs.push_back(std::move(rec));
    report.completed_epochs = epoch + 1;
    last_finite = net;
    lr *= schedule.lr_decay;
  }

  report.final_net = std::move(net);
  report.total_seconds = seconds_since(t0);
  return report;
}

nlohmann::json train_report_to_json(const TrainReport& report, bool include_timing,
                                    bool include_network) {
  nlohmann::json j;
  j["diverged"] = report.diverged;
  j["completed_epochs"] = report.completed_epochs;
  if (include_timing) j["total_seconds"] = report.total_seconds;
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochRecord& rec : report.epochs) {
    nlohmann::json e;
    e["epoch"] = rec.epoch;
    e["objective"] = {{"empirical", rec.objective.empirical}, {"l2", rec.objective.l2},
                      {"lcnn", rec.objective.lcnn},           {"kl", rec.objective.kl},
                      {"total", rec.objective.total}};
    if (std::isfinite(rec.train_accuracy)) e["train_accuracy"] = rec.train_accuracy;
    if (rec.has_validation && std::isfinite(rec.val_accuracy)) e["val_accuracy"] = rec.val_accuracy;
    e["layer_grad_means"] = rec.layer_grad_means;
    if (include_timing) e["seconds"] = rec.seconds;
    epochs.push_back(std::move(e));
  }
  j["epochs"] = std::move(epochs);
  if (include_network) j["network"] = network_to_json(report.final_net);
  return j;
}

void train_report_to_csv(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  const std::size_t layers = report.epochs.empty() ? 0 : report.epochs.front().layer_grad_means.size();
  out << "epoch,total,empirical,l2,lcnn,kl,train_accuracy,val_accuracy,seconds";
  for (std::size_t k = 0; k < layers; ++k) out << ",grad_mean_" << k;
  out << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    out << ',' << buf;
  };
  for (const EpochRecord& rec : report.epochs) {
    out << rec.epoch;
    put(rec.objective.total);
    put(rec.objective.empirical);
    put(rec.objective.l2);
    put(rec.objective.lcnn);
    put(rec.objective.kl);
    put(rec.train_accuracy);
    put(rec.has_validation ? rec.val_accuracy : -1.0);
    put(rec.seconds);
    for (double g : rec.layer_grad_means) put(g);
    out << "\n";
  }
}

}  // namespace lcnn
