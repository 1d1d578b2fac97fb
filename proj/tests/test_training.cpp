#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "doctest.h"
#include "lcnn/data.hpp"
#include "lcnn/error.hpp"
#include "lcnn/rng.hpp"
#include "lcnn/training.hpp"

using namespace lcnn;

namespace {

Matrix random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

Targets random_se_targets(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Targets t;
  t.values = Matrix(rows, cols);
  t.labels.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t.values(i, j) = rng.bernoulli(0.5) ? 0.9 : -0.9;
    t.labels[i] = static_cast<int>(rng.below(cols));
  }
  return t;
}

}  // namespace

TEST_CASE("analytic gradients match finite differences across objectives") {
  const Matrix x = random_batch(7, 4, 100);
  for (const LcnnMode mode : {LcnnMode::Off, LcnnMode::LastLayer, LcnnMode::AllLayers})
    for (const double decay : {0.0, 0.05}) {
      ObjectiveSpec se;
      se.loss = LossKind::SquaredError;
      se.weight_decay = decay;
      se.lcnn_mode = mode;
      se.lcnn_d = mode == LcnnMode::Off ? 0.0 : 1e-2;
      const Network net =
          init_network(make_config({4, 6, 3}, ActivationKind::Tanh, ActivationKind::Tanh, 3));
      Targets t = random_se_targets(7, 3, 200);
      CHECK(gradient_check(net, se, x, t) < 1e-6);

      ObjectiveSpec ce = se;
      ce.loss = LossKind::SoftmaxCrossEntropy;
      const Network soft =
          init_network(make_config({4, 6, 3}, ActivationKind::Tanh, ActivationKind::Softmax, 4));
      CHECK(gradient_check(soft, ce, x, t) < 1e-6);
    }
}

TEST_CASE("gradient check covers logistic hidden layers and minibatch scaling") {
  const Matrix x = random_batch(5, 3, 7);
  Targets t = random_se_targets(5, 1, 8);
  ObjectiveSpec spec;
  spec.loss = LossKind::SquaredError;
  spec.lcnn_mode = LcnnMode::AllLayers;
  spec.lcnn_d = 1e-3;
  const Network net =
      init_network(make_config({3, 5, 4, 1}, ActivationKind::Logistic, ActivationKind::Tanh, 9));
  CHECK(gradient_check(net, spec, x, t) < 1e-6);
}

TEST_CASE("penalty scale multiplies the lcnn gradient contribution") {
  const Matrix x = random_batch(4, 3, 21);
  Targets t = random_se_targets(4, 2, 22);
  ObjectiveSpec off;
  off.loss = LossKind::SquaredError;
  ObjectiveSpec on = off;
  on.lcnn_mode = LcnnMode::LastLayer;
  on.lcnn_d = 0.01;
  const Network net =
      init_network(make_config({3, 4, 2}, ActivationKind::Tanh, ActivationKind::Tanh, 5));
  const ForwardTrace tr = forward(net, x);
  const Gradients g_off = backward(net, tr, off, t);
  const Gradients g1 = backward(net, tr, on, t, 1.0);
  const Gradients g3 = backward(net, tr, on, t, 3.0);
  // (g3 - g_off) == 3 (g1 - g_off) entrywise on the output layer
  const Matrix& w_off = g_off.weights[1];
  for (std::size_t i = 0; i < w_off.size(); ++i) {
    const double lhs = g3.weights[1].data[i] - w_off.data[i];
    const double rhs = 3.0 * (g1.weights[1].data[i] - w_off.data[i]);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
  }
}

TEST_CASE("dropout mask is inverted and unbiased") {
  Rng rng(17);
  const double rate = 0.4;
  double total = 0.0;
  std::size_t kept = 0;
  const Matrix m = dropout_mask(200, 50, rate, rng);
  for (double v : m.data) {
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / (1.0 - rate))));
    total += v;
    if (v != 0.0) ++kept;
  }
  CHECK(total / static_cast<double>(m.size()) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(static_cast<double>(kept) / static_cast<double>(m.size()) ==
        doctest::Approx(1.0 - rate).epsilon(0.05));
  Rng rng2(17);
  CHECK_THROWS_AS(dropout_mask(2, 2, 1.0, rng2), spec_error);
}

TEST_CASE("sgd separates blobs and records telemetry") {
  const Dataset ds = synthetic_blobs(90, 3, 2, 0.3, 11);
  const ScalingParams sc = fit_scaling(ds.features, iota_indices(ds.size()));
  const Matrix x = apply_scaling(ds.features, sc);
  const Targets y = encode_targets(ds.labels, ds.k_classes, LossKind::SquaredError);
  ObjectiveSpec spec;
  spec.loss = LossKind::SquaredError;
  Network net =
      init_network(make_config({3, 5, 1}, ActivationKind::Tanh, ActivationKind::Tanh, 2));
  TrainSchedule sched;
  sched.epochs = 40;
  sched.batch_size = 8;
  sched.learning_rate = 0.1;
  const TrainReport report = sgd_train(std::move(net), x, y, spec, sched);
  REQUIRE(!report.diverged);
  REQUIRE(report.epochs.size() == 40);
  CHECK(report.completed_epochs == 40);
  CHECK(report.epochs.back().objective.total < report.epochs.front().objective.total);
  CHECK(report.epochs.back().train_accuracy > 0.95);
  CHECK(report.epochs.back().layer_grad_means.size() == 2);
  CHECK(accuracy(report.final_net, x, ds.labels) > 0.95);
}

TEST_CASE("training is deterministic across thread counts") {
  const Dataset ds = synthetic_blobs(60, 4, 3, 0.4, 5);
  const Matrix x = apply_scaling(ds.features, fit_scaling(ds.features, iota_indices(ds.size())));
  const Targets y = encode_targets(ds.labels, ds.k_classes, LossKind::SoftmaxCrossEntropy);
  ObjectiveSpec spec;
  spec.loss = LossKind::SoftmaxCrossEntropy;
  spec.lcnn_mode = LcnnMode::AllLayers;
  spec.lcnn_d = 1e-4;
  TrainSchedule sched;
  sched.epochs = 8;
  sched.batch_size = 16;
  const NetworkConfig cfg =
      make_config({4, 6, 3}, ActivationKind::Tanh, ActivationKind::Softmax, 13);

  auto run = [&] { return sgd_train(init_network(cfg), x, y, spec, sched); };
#ifdef _OPENMP
  omp_set_num_threads(1);
#endif
  const TrainReport a = run();
#ifdef _OPENMP
  omp_set_num_threads(4);
#endif
  const TrainReport b = run();
  REQUIRE(a.final_net.depth() == b.final_net.depth());
  for (std::size_t k = 0; k < a.final_net.depth(); ++k) {
    CHECK(a.final_net.weights[k] == b.final_net.weights[k]);
    CHECK(a.final_net.biases[k] == b.final_net.biases[k]);
  }
  for (std::size_t e = 0; e < a.epochs.size(); ++e)
    CHECK(a.epochs[e].objective.total == b.epochs[e].objective.total);
}

TEST_CASE("divergence restores the last finite network") {
  const Dataset ds = synthetic_blobs(40, 3, 2, 0.3, 19);
  const Matrix x = apply_scaling(ds.features, fit_scaling(ds.features, iota_indices(ds.size())));
  const Targets y = encode_targets(ds.labels, ds.k_classes, LossKind::SquaredError);
  ObjectiveSpec spec;
  spec.loss = LossKind::SquaredError;
  spec.weight_decay = 1.0;  // w <- w (1 - lr) explodes multiplicatively
  TrainSchedule sched;
  sched.epochs = 60;
  sched.batch_size = 4;
  sched.learning_rate = 1e12;
  const TrainReport report = sgd_train(
      init_network(make_config({3, 4, 1}, ActivationKind::Tanh, ActivationKind::Tanh, 3)), x, y,
      spec, sched);
  CHECK(report.diverged);
  CHECK(report.completed_epochs < 60);
  for (const Matrix& w : report.final_net.weights) CHECK(w.all_finite());
}

TEST_CASE("schedule and report json round-trip") {
  TrainSchedule s;
  s.epochs = 12;
  s.batch_size = 4;
  s.learning_rate = 0.2;
  s.lr_decay = 0.9;
  s.shuffle_seed = 99;
  s.telemetry = false;
  const TrainSchedule back = schedule_from_json(schedule_to_json(s));
  CHECK(back.epochs == 12);
  CHECK(back.batch_size == 4);
  CHECK(back.learning_rate == 0.2);
  CHECK(back.lr_decay == 0.9);
  CHECK(back.shuffle_seed == 99);
  CHECK(back.telemetry == false);

  const Dataset ds = synthetic_blobs(30, 3, 2, 0.3, 23);
  const Matrix x = apply_scaling(ds.features, fit_scaling(ds.features, iota_indices(ds.size())));
  const Targets y = encode_targets(ds.labels, ds.k_classes, LossKind::SquaredError);
  ObjectiveSpec spec;
  spec.loss = LossKind::SquaredError;
  TrainSchedule sched;
  sched.epochs = 3;
  const TrainReport report = sgd_train(
      init_network(make_config({3, 4, 1}, ActivationKind::Tanh, ActivationKind::Tanh, 3)), x, y,
      spec, sched);
  const nlohmann::json timed = train_report_to_json(report, true, true);
  CHECK(timed.contains("total_seconds"));
  CHECK(timed.contains("network"));
  const nlohmann::json bare = train_report_to_json(report, false, false);
  CHECK(!bare.contains("total_seconds"));
  CHECK(!bare.contains("network"));
  CHECK(!bare.dump().empty());
  for (const auto& e : bare.at("epochs")) CHECK(!e.contains("seconds"));
}

TEST_CASE("schedule validation errors") {
  const Matrix x = random_batch(4, 2, 1);
  Targets y = random_se_targets(4, 1, 2);
  ObjectiveSpec spec;
  spec.loss = LossKind::SquaredError;
  const NetworkConfig cfg = make_config({2, 3, 1}, ActivationKind::Tanh, ActivationKind::Tanh, 1);
  TrainSchedule bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(sgd_train(init_network(cfg), x, y, spec, bad), config_error);
  bad = TrainSchedule{};
  bad.learning_rate = -1;
  CHECK_THROWS_AS(sgd_train(init_network(cfg), x, y, spec, bad), config_error);
  bad = TrainSchedule{};
  bad.batch_size = 99;  // larger than the batch
  CHECK_THROWS_AS(sgd_train(init_network(cfg), x, y, spec, bad), config_error);
}

TEST_CASE("relu units near the kink are excluded from the check") {
  // a relu net still passes because crossing units are skipped
  const Matrix x = random_batch(6, 3, 31);
  Targets t = random_se_targets(6, 2, 32);
  ObjectiveSpec spec;
  spec.loss = LossKind::SquaredError;
  const Network net =
      init_network(make_config({3, 8, 2}, ActivationKind::Relu, ActivationKind::Tanh, 6));
  CHECK(gradient_check(net, spec, x, t) < 1e-5);
}
