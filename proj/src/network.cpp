#include "lcnn/network.hpp"

#include <cmath>
#include <fstream>

#include "lcnn/error.hpp"
#include "lcnn/rng.hpp"

namespace lcnn {

NetworkConfig make_config(const std::vector<std::size_t>& widths, ActivationKind hidden,
                          ActivationKind output, std::uint64_t seed) {
  NetworkConfig cfg;
  cfg.layer_widths = widths;
  if (widths.size() < 2) throw config_error("network needs at least input and output widths");
  cfg.activations.assign(widths.size() - 2, hidden);
  cfg.activations.push_back(output);
  cfg.seed = seed;
  return cfg;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t h = 0; h < weights.size(); ++h) n += weights[h].size() + biases[h].size();
  return n;
}

Network init_network(const NetworkConfig& config) {
  if (config.layer_widths.size() < 2) throw config_error("network needs at least two layer widths");
  for (std::size_t w : config.layer_widths)
    if (w == 0) throw config_error("zero-width layer");
  if (config.activations.size() != config.layer_widths.size() - 1)
    throw config_error("one activation per weight layer required");
  for (std::size_t h = 0; h + 1 < config.activations.size(); ++h)
    if (config.activations[h] == ActivationKind::Softmax)
      throw config_error("softmax is only legal on the output layer");

  Network net;
  net.config = config;
  Rng rng(config.seed);
  for (std::size_t h = 0; h + 1 < config.layer_widths.size(); ++h) {
    const std::size_t fan_in = config.layer_widths[h];
    const std::size_t fan_out = config.layer_widths[h + 1];
    const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_out, fan_in);
    for (double& v : w.data) v = rng.uniform(-r, r);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(1, fan_out, 0.0);
  }
  return net;
}

ForwardTrace forward(const Network& net, const Matrix& batch, const Matrix* penultimate_mask) {
  if (batch.cols != net.input_width()) throw shape_error("forward: batch width mismatch");
  if (!batch.all_finite()) throw data_error("forward: non-finite input");
  ForwardTrace trace;
  trace.activations.reserve(net.depth() + 1);
  trace.preacts.reserve(net.depth());
  trace.activations.push_back(batch);
  if (penultimate_mask) {
    if (net.depth() < 2) throw config_error("dropout needs a hidden layer");
    if (penultimate_mask->rows != batch.rows || penultimate_mask->cols != net.penultimate_width())
      throw shape_error("forward: dropout mask shape mismatch");
    trace.dropout_mask = *penultimate_mask;
    trace.mask_layer = net.depth() - 1;
  }
  for (std::size_t h = 0; h < net.depth(); ++h) {
    Matrix a = add_row_broadcast(matmul_a_bt(trace.activations.back(), net.weights[h]), net.biases[h]);
    Matrix u = activate(net.config.activations[h], a);
    trace.preacts.push_back(std::move(a));
    if (penultimate_mask && h == net.depth() - 2) u = hadamard(u, trace.dropout_mask);
    trace.activations.push_back(std::move(u));
  }
  return trace;
}

std::vector<int> predict_from_trace(const ForwardTrace& trace) {
  std::vector<int> out;
  if (trace.output().cols == 1) {
    const Matrix& net_in = trace.output_preact();
    out.reserve(net_in.rows);
    for (std::size_t i = 0; i < net_in.rows; ++i) out.push_back(net_in(i, 0) >= 0.0 ? 1 : -1);
    return out;
  }
  const Matrix& scores = trace.output();
  out.reserve(scores.rows);
  for (std::size_t i = 0; i < scores.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.cols; ++j)
      if (scores(i, j) > scores(i, best)) best = j;
    out.push_back(static_cast<int>(best));
  }
  return out;
}

std::vector<int> predict(const Network& net, const Matrix& batch) {
  return predict_from_trace(forward(net, batch));
}

double accuracy(const Network& net, const Matrix& batch, const std::vector<int>& labels) {
  if (batch.rows != labels.size()) throw shape_error("accuracy: label count mismatch");
  if (labels.empty()) throw data_error("accuracy: empty batch");
  const std::vector<int> preds = predict(net, batch);
  const bool binary = net.output_width() == 1;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int want = binary ? (labels[i] == 1 ? 1 : -1) : labels[i];
    if (preds[i] == want) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

Matrix augmented_penultimate(const ForwardTrace& trace) {
  if (trace.activations.size() < 2) throw shape_error("trace has no penultimate layer");
  const Matrix& u = trace.activations[trace.activations.size() - 2];
  Matrix aug(u.rows, u.cols + 1);
  for (std::size_t i = 0; i < u.rows; ++i) {
    const double* src = u.row_ptr(i);
    double* dst = aug.row_ptr(i);
    for (std::size_t j = 0; j < u.cols; ++j) dst[j] = src[j];
    dst[u.cols] = 1.0;
  }
  return aug;
}

Matrix output_beta(const Network& net) {
  const Matrix& w = net.weights.back();
  const Matrix& b = net.biases.back();
  Matrix beta(w.rows, w.cols + 1);
  for (std::size_t j = 0; j < w.rows; ++j) {
    const double* src = w.row_ptr(j);
    double* dst = beta.row_ptr(j);
    for (std::size_t i = 0; i < w.cols; ++i) dst[i] = src[i];
    dst[w.cols] = b(0, j);
  }
  return beta;
}

nlohmann::json network_to_json(const Network& net) {
  nlohmann::json j;
  j["format"] = "lcnn-network";
  j["version"] = 1;
  j["kind"] = "classifier";
  j["layer_widths"] = net.config.layer_widths;
  std::vector<std::string> acts;
  for (ActivationKind k : net.config.activations) acts.push_back(to_string(k));
  j["activations"] = acts;
  j["seed"] = net.config.seed;
  nlohmann::json ws = nlohmann::json::array(), bs = nlohmann::json::array();
  for (std::size_t h = 0; h < net.depth(); ++h) {
    ws.push_back(net.weights[h].data);
    bs.push_back(net.biases[h].data);
  }
  j["weights"] = std::move(ws);
  j["biases"] = std::move(bs);
  return j;
}

Network network_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "lcnn-network")
    throw config_error("not a network document");
  if (j.value("version", 0) != 1) throw config_error("unsupported network document version");
  NetworkConfig cfg;
  cfg.layer_widths = j.at("layer_widths").get<std::vector<std::size_t>>();
  for (const auto& name : j.at("activations"))
    cfg.activations.push_back(activation_from_string(name.get<std::string>()));
  cfg.seed = j.value("seed", std::uint64_t{0});
  Network net = init_network(cfg);
  const auto& ws = j.at("weights");
  const auto& bs = j.at("biases");
  if (ws.size() != net.depth() || bs.size() != net.depth())
    throw config_error("layer count mismatch in network document");
  for (std::size_t h = 0; h < net.depth(); ++h) {
    auto w = ws[h].get<std::vector<double>>();
    auto b = bs[h].get<std::vector<double>>();
    if (w.size() != net.weights[h].size() || b.size() != net.biases[h].size())
      throw config_error("parameter block size mismatch in network document");
    net.weights[h].data = std::move(w);
    net.biases[h].data = std::move(b);
  }
  return net;
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << network_to_json(net).dump(2) << "\n";
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot read " + path);
  nlohmann::json j;
  in >> j;
  return network_from_json(j);
}

}  // namespace lcnn
