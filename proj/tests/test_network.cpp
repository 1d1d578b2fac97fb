#include <cmath>

#include "doctest.h"
#include "lcnn/error.hpp"
#include "lcnn/network.hpp"
#include "lcnn/rng.hpp"

using namespace lcnn;

TEST_CASE("initialization ranges and determinism") {
  const NetworkConfig cfg = make_config({5, 8, 3}, ActivationKind::Tanh, ActivationKind::Softmax, 9);
  const Network net = init_network(cfg);
  REQUIRE(net.depth() == 2);
  CHECK(net.input_width() == 5);
  CHECK(net.output_width() == 3);
  CHECK(net.penultimate_width() == 8);
  CHECK(net.parameter_count() == 5 * 8 + 8 + 8 * 3 + 3);
  for (std::size_t k = 0; k < net.depth(); ++k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.weights[k].cols));
    for (double w : net.weights[k].data) {
      CHECK(w >= -bound);
      CHECK(w <= bound);
    }
    for (double b : net.biases[k].data) CHECK(b == 0.0);
  }
  const Network again = init_network(cfg);
  CHECK(again.weights[0] == net.weights[0]);
  NetworkConfig other = cfg;
  other.seed = 10;
  CHECK(!(init_network(other).weights[0] == net.weights[0]));
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(init_network(make_config({4}, ActivationKind::Tanh, ActivationKind::Tanh, 1)),
                  config_error);
  CHECK_THROWS_AS(init_network(make_config({4, 0, 2}, ActivationKind::Tanh, ActivationKind::Tanh, 1)),
                  config_error);
  NetworkConfig cfg = make_config({4, 3, 2}, ActivationKind::Softmax, ActivationKind::Softmax, 1);
  CHECK_THROWS_AS(init_network(cfg), config_error);  // softmax only on the output layer
}

TEST_CASE("forward matches hand computation on an identity-activation net") {
  NetworkConfig cfg = make_config({2, 2, 1}, ActivationKind::Identity, ActivationKind::Identity, 1);
  Network net = init_network(cfg);
  net.weights[0] = Matrix::from_rows({{1, 2}, {3, 4}});
  net.biases[0] = Matrix::from_rows({{1, -1}});
  net.weights[1] = Matrix::from_rows({{2, 1}});
  net.biases[1] = Matrix::from_rows({{0.5}});
  const Matrix x = Matrix::from_rows({{1, 1}});
  const ForwardTrace tr = forward(net, x);
  REQUIRE(tr.preacts.size() == 2);
  CHECK(tr.preacts[0](0, 0) == 4);   // 1+2+1
  CHECK(tr.preacts[0](0, 1) == 6);   // 3+4-1
  CHECK(tr.preacts[1](0, 0) == 2 * 4 + 6 + 0.5);
  CHECK(tr.output()(0, 0) == 14.5);
  CHECK(tr.batch_size() == 1);
}

TEST_CASE("forward applies the chosen activations") {
  NetworkConfig cfg = make_config({1, 1, 1}, ActivationKind::Tanh, ActivationKind::Logistic, 1);
  Network net = init_network(cfg);
  net.weights[0] = Matrix::from_rows({{2.0}});
  net.weights[1] = Matrix::from_rows({{3.0}});
  const Matrix x = Matrix::from_rows({{0.5}});
  const ForwardTrace tr = forward(net, x);
  const double h = std::tanh(1.0);
  CHECK(tr.activations[1](0, 0) == doctest::Approx(h));
  CHECK(tr.output()(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-3.0 * h))));
}

TEST_CASE("penultimate dropout mask zeroes the masked units") {
  NetworkConfig cfg = make_config({3, 4, 2}, ActivationKind::Tanh, ActivationKind::Tanh, 5);
  Network net = init_network(cfg);
  const Matrix x = Matrix::from_rows({{0.2, -0.4, 0.6}, {1, 0, -1}});
  Matrix mask(2, 4);
  for (double& v : mask.data) v = 0.0;
  mask(0, 1) = 2.0;
  mask(1, 3) = 2.0;
  const ForwardTrace tr = forward(net, x, &mask);
  const ForwardTrace plain = forward(net, x);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(tr.activations[1](0, j) == doctest::Approx(plain.activations[1](0, j) * mask(0, j)));
    CHECK(tr.activations[1](1, j) == doctest::Approx(plain.activations[1](1, j) * mask(1, j)));
  }
}

TEST_CASE("predict thresholds and argmax") {
  NetworkConfig cfg = make_config({2, 1}, ActivationKind::Tanh, ActivationKind::Tanh, 1);
  Network net = init_network(cfg);
  net.weights[0] = Matrix::from_rows({{1, 0}});
  net.biases[0] = Matrix::from_rows({{0}});
  const Matrix x = Matrix::from_rows({{0.7, 0}, {-0.7, 0}, {0, 0}});
  const std::vector<int> p = predict(net, x);
  CHECK(p[0] == 1);
  CHECK(p[1] == -1);
  CHECK(p[2] == 1);  // boundary counts as positive

  NetworkConfig mc = make_config({2, 3}, ActivationKind::Tanh, ActivationKind::Softmax, 1);
  Network net3 = init_network(mc);
  net3.weights[0] = Matrix::from_rows({{1, 0}, {1, 0}, {0, 1}});
  net3.biases[0] = Matrix::from_rows({{0, 0, 0}});
  const std::vector<int> q = predict(net3, Matrix::from_rows({{1, 0}, {0, 1}}));
  CHECK(q[0] == 0);  // tie between logits 0 and 1 resolved to the lower index
  CHECK(q[1] == 2);
}

TEST_CASE("accuracy maps binary labels to signs") {
  NetworkConfig cfg = make_config({1, 1}, ActivationKind::Tanh, ActivationKind::Tanh, 1);
  Network net = init_network(cfg);
  net.weights[0] = Matrix::from_rows({{1.0}});
  const Matrix x = Matrix::from_rows({{1.0}, {-1.0}, {2.0}, {-2.0}});
  CHECK(accuracy(net, x, {1, 0, 1, 1}) == doctest::Approx(0.75));
}

TEST_CASE("augmented penultimate and output beta") {
  NetworkConfig cfg = make_config({2, 3, 1}, ActivationKind::Tanh, ActivationKind::Tanh, 2);
  Network net = init_network(cfg);
  const Matrix x = Matrix::from_rows({{0.1, -0.2}});
  const ForwardTrace tr = forward(net, x);
  const Matrix aug = augmented_penultimate(tr);
  REQUIRE(aug.cols == 4);
  CHECK(aug(0, 3) == 1.0);
  for (std::size_t j = 0; j < 3; ++j) CHECK(aug(0, j) == tr.activations[1](0, j));
  const Matrix beta = output_beta(net);
  REQUIRE(beta.rows == 1);
  REQUIRE(beta.cols == 4);
  for (std::size_t j = 0; j < 3; ++j) CHECK(beta(0, j) == net.weights[1](0, j));
  CHECK(beta(0, 3) == net.biases[1](0, 0));
}

TEST_CASE("network json round-trips exactly") {
  const NetworkConfig cfg = make_config({3, 5, 2}, ActivationKind::Logistic, ActivationKind::Tanh, 77);
  const Network net = init_network(cfg);
  const Network back = network_from_json(network_to_json(net));
  REQUIRE(back.depth() == net.depth());
  for (std::size_t k = 0; k < net.depth(); ++k) {
    CHECK(back.weights[k] == net.weights[k]);
    CHECK(back.biases[k] == net.biases[k]);
    CHECK(back.config.activations[k] == net.config.activations[k]);
  }
}

TEST_CASE("forward rejects bad batches") {
  const Network net = init_network(make_config({3, 2}, ActivationKind::Tanh, ActivationKind::Tanh, 1));
  CHECK_THROWS_AS(forward(net, Matrix(2, 4)), shape_error);
  Matrix bad(1, 3);
  bad(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(forward(net, bad), data_error);
}
