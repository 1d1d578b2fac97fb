#include <cmath>

#include "doctest.h"
#include "lcnn/capacity.hpp"
#include "lcnn/data.hpp"
#include "lcnn/error.hpp"

using namespace lcnn;

TEST_CASE("dichotomy count closed form") {
  CHECK(dichotomy_count(3, 3) == 8);   // M < n+1 -> 2^M
  CHECK(dichotomy_count(1, 2) == 2);
  CHECK(dichotomy_count(4, 3) == 14);  // 2 (C(3,0)+C(3,1)+C(3,2)) = 2 (1+3+3)
  CHECK(dichotomy_count(5, 2) == 10);  // 2 (C(4,0)+C(4,1))
}

TEST_CASE("dichotomy count matches an independent pascal-triangle evaluation") {
  for (std::size_t m = 1; m <= 20; ++m)
    for (std::size_t n = 1; n <= 6; ++n) {
      BigInt expected;
      if (m < n + 1) {
        expected = BigInt(1) << m;
      } else {
        // row m-1 of Pascal's triangle, partial sum up to n-1
        std::vector<BigInt> row{1};
        for (std::size_t r = 1; r < m; ++r) {
          std::vector<BigInt> next(r + 1, 1);
          for (std::size_t c = 1; c < r; ++c) next[c] = row[c - 1] + row[c];
          row = std::move(next);
        }
        expected = 0;
        for (std::size_t i = 0; i < n && i < row.size(); ++i) expected += row[i];
        expected *= 2;
      }
      CHECK(dichotomy_count(m, n) == expected);
    }
  // large-argument smoke check: stays exact, no overflow
  CHECK(dichotomy_count(100, 3) > 0);
  CHECK(dichotomy_count(64, 64) == BigInt(1) << 64);
}

TEST_CASE("dichotomy count argument validation") {
  CHECK_THROWS_AS(dichotomy_count(0, 3), domain_error);
  CHECK_THROWS_AS(dichotomy_count(3, 0), domain_error);
}

TEST_CASE("geometric margin and radius") {
  const Matrix aug = Matrix::from_rows({{1, 0, 1}, {0, 1, 1}, {2, 2, 1}});
  const std::vector<double> beta{1.0, 1.0, 0.0};
  // projections: 1, 1, 4 over ||beta|| = sqrt(2)
  CHECK(geometric_margin(aug, beta) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(enclosing_radius(aug) == doctest::Approx(3.0));
  const std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(geometric_margin(aug, zero), degenerate_error);
}

TEST_CASE("theta inverts the output nonlinearity") {
  CHECK(theta_from_target(ActivationKind::Tanh, 0.9) == doctest::Approx(std::atanh(0.9)));
  CHECK(std::atanh(0.9) == doctest::Approx(1.4722194895832204).epsilon(1e-12));
  CHECK(theta_from_target(ActivationKind::Logistic, 0.9) == doctest::Approx(std::log(9.0)));
  CHECK(theta_from_target(ActivationKind::Identity, 0.9) == 0.9);
  CHECK_THROWS_AS(theta_from_target(ActivationKind::Softmax, 0.9), unsupported_error);
  CHECK_THROWS_AS(theta_from_target(ActivationKind::Relu, 0.9), unsupported_error);
  CHECK_THROWS_AS(theta_from_target(ActivationKind::Tanh, 1.0), domain_error);
}

TEST_CASE("vc bound on a hand-built linear net") {
  // one tanh output on 2 inputs; beta = (w, bias) = (0.01, 0, 0)
  Network net = init_network(make_config({2, 1}, ActivationKind::Tanh, ActivationKind::Tanh, 1));
  net.weights[0] = Matrix::from_rows({{0.01, 0.0}});
  net.biases[0] = Matrix::from_rows({{0.0}});
  const Matrix x = Matrix::from_rows({{1.0, 0.0}, {-1.0, 0.0}});
  const ForwardTrace tr = forward(net, x);
  const CapacityReport rep = vc_bound(net, tr, 0.9);

  CHECK(rep.m == 2);
  CHECK(rep.n == 2);
  CHECK(rep.theta_available);
  const double theta = std::atanh(0.9);
  CHECK(rep.theta == doctest::Approx(theta));
  // net_i = +-0.01, ||beta|| = 0.01, margin d = 1, R1 = sqrt(2)
  CHECK(rep.d_min == doctest::Approx(1.0));
  CHECK(rep.r1 == doctest::Approx(std::sqrt(2.0)));
  const double c_prime = 2.0 / (2.0 * 1.0 * theta * theta);
  CHECK(rep.c_prime == doctest::Approx(c_prime));
  const double sum_sq = 2.0 * 1e-4;
  CHECK(rep.sum_sq_net == doctest::Approx(sum_sq));
  CHECK(rep.gamma_bound == doctest::Approx(1.0 + 4.0 * c_prime * sum_sq));
  CHECK(rep.gamma_bound < 1.01);
  CHECK(!rep.non_separable);

  // scaling beta up leaves the margin-based pieces but grows sum_sq until the
  // width cap takes over
  net.weights[0] = Matrix::from_rows({{100.0, 0.0}});
  const ForwardTrace tr2 = forward(net, x);
  const CapacityReport rep2 = vc_bound(net, tr2, 0.9);
  CHECK(rep2.gamma_bound == doctest::Approx(1.0 + 2.0));  // clamped at 1 + n
}

TEST_CASE("vc bound flags non-separable output") {
  Network net = init_network(make_config({2, 1}, ActivationKind::Tanh, ActivationKind::Tanh, 1));
  net.weights[0] = Matrix::from_rows({{1.0, 0.0}});
  net.biases[0] = Matrix::from_rows({{0.0}});
  const Matrix x = Matrix::from_rows({{0.0, 1.0}, {0.0, -1.0}});  // both project to 0
  const CapacityReport rep = vc_bound(net, forward(net, x), 0.9);
  CHECK(rep.non_separable);
  CHECK(rep.gamma_bound == doctest::Approx(1.0 + 2.0));
}

TEST_CASE("multiclass bound takes the worst class and totals the preactivations") {
  Network net = init_network(make_config({2, 4, 3}, ActivationKind::Tanh, ActivationKind::Softmax, 7));
  const Matrix x = Matrix::from_rows({{0.3, -0.2}, {-0.5, 0.8}, {0.9, 0.1}});
  const ForwardTrace tr = forward(net, x);
  const CapacityReport rep = vc_bound(net, tr, 0.9);
  REQUIRE(rep.per_class.size() == 3);
  CHECK(!rep.theta_available);
  CHECK(rep.theta == 1.0);
  double total = 0.0, worst = 0.0;
  for (const ClassCapacity& c : rep.per_class) {
    total += c.sum_sq_net;
    worst = std::max(worst, c.gamma_bound);
  }
  CHECK(rep.sum_sq_net == doctest::Approx(total));
  CHECK(rep.gamma_bound == doctest::Approx(worst));
  CHECK(rep.n == 4);
  // json emission carries the headline fields
  const nlohmann::json j = capacity_report_to_json(rep);
  CHECK(j.at("gamma_bound").get<double>() == doctest::Approx(rep.gamma_bound));
  CHECK(j.at("per_class").size() == 3);
}

TEST_CASE("range margin uses activation spread") {
  const Matrix outputs = Matrix::from_rows({{0.2}, {0.9}, {-0.3}});
  const std::vector<double> w{3.0, 4.0};
  CHECK(range_margin(outputs, 0, w) == doctest::Approx((0.9 + 0.3) / 5.0));
}

TEST_CASE("separability check distinguishes blobs from rings") {
  const Dataset blobs = synthetic_blobs(60, 2, 2, 0.2, 3);
  CHECK(separability_check(blobs.features, blobs.labels));
  const Dataset rings = synthetic_rings(80, 5);
  CHECK(!separability_check(rings.features, rings.labels));
  const Matrix xor_pts = Matrix::from_rows({{0, 0}, {1, 1}, {0, 1}, {1, 0}});
  CHECK(!separability_check(xor_pts, {0, 0, 1, 1}));
  CHECK_THROWS_AS(separability_check(xor_pts, {0, 1, 2, 0}), data_error);
}
