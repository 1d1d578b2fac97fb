#include <cmath>

#include "doctest.h"
#include "lcnn/error.hpp"
#include "lcnn/matrix.hpp"
#include "lcnn/rng.hpp"

using namespace lcnn;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(-2.0, 2.0);
  return m;
}

}  // namespace

TEST_CASE("matmul hand values") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{5, 6}, {7, 8}});
  const Matrix c = matmul(a, b);
  CHECK(c(0, 0) == 19);
  CHECK(c(0, 1) == 22);
  CHECK(c(1, 0) == 43);
  CHECK(c(1, 1) == 50);
  CHECK(matmul(a, Matrix::identity(2)) == a);
}

TEST_CASE("matmul rejects mismatched shapes") {
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), shape_error);
}

TEST_CASE("transposed products match explicit transpose") {
  Rng rng(11);
  const Matrix a = random_matrix(7, 5, rng);
  const Matrix b = random_matrix(7, 4, rng);
  const Matrix c = random_matrix(5, 4, rng);
  const Matrix atb = matmul_at_b(a, b);
  const Matrix ref = matmul(transpose(a), b);
  REQUIRE(atb.same_shape(ref));
  for (std::size_t i = 0; i < atb.data.size(); ++i)
    CHECK(atb.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
  const Matrix abt = matmul_a_bt(b, c);  // (7x4)(5x4)^T -> 7x5
  const Matrix ref2 = matmul(b, transpose(c));
  REQUIRE(abt.same_shape(ref2));
  for (std::size_t i = 0; i < abt.data.size(); ++i)
    CHECK(abt.data[i] == doctest::Approx(ref2.data[i]).epsilon(1e-12));
}

TEST_CASE("parallel kernels agree with the serial reference") {
  Rng rng(3);
  for (std::size_t trial = 0; trial < 4; ++trial) {
    const std::size_t m = 1 + rng.below(60), k = 1 + rng.below(60), n = 1 + rng.below(60);
    const Matrix a = random_matrix(m, k, rng);
    const Matrix b = random_matrix(k, n, rng);
    const Matrix par = matmul(a, b);
    const Matrix ser = serial::matmul(a, b);
    REQUIRE(par.same_shape(ser));
    for (std::size_t i = 0; i < par.data.size(); ++i)
      CHECK(par.data[i] == doctest::Approx(ser.data[i]).epsilon(1e-12));
  }
  const Matrix a = random_matrix(40, 30, rng);
  const Matrix b = random_matrix(40, 20, rng);
  const Matrix p1 = matmul_at_b(a, b), s1 = serial::matmul_at_b(a, b);
  for (std::size_t i = 0; i < p1.data.size(); ++i)
    CHECK(p1.data[i] == doctest::Approx(s1.data[i]).epsilon(1e-12));
}

TEST_CASE("elementwise helpers") {
  const Matrix a = Matrix::from_rows({{1, -2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{2, 2}, {2, 2}});
  CHECK(add(a, b) == Matrix::from_rows({{3, 0}, {5, 6}}));
  CHECK(subtract(a, b) == Matrix::from_rows({{-1, -4}, {1, 2}}));
  CHECK(hadamard(a, b) == Matrix::from_rows({{2, -4}, {6, 8}}));
  CHECK(scale(a, 0.5) == Matrix::from_rows({{0.5, -1}, {1.5, 2}}));
  CHECK(sum_squares(a) == 1 + 4 + 9 + 16);
  CHECK(sum_abs(a) == 10);
  const Matrix cols = column_sums(a);
  CHECK(cols(0, 0) == 4);
  CHECK(cols(0, 1) == 2);
  CHECK(row_norm(a, 1) == doctest::Approx(5.0));
  Matrix c = a;
  axpy_inplace(c, 2.0, b);
  CHECK(c == Matrix::from_rows({{5, 2}, {7, 8}}));
  CHECK(add_row_broadcast(a, Matrix::from_rows({{10, 20}})) ==
        Matrix::from_rows({{11, 18}, {13, 24}}));
}

TEST_CASE("activation values and derivatives") {
  const Matrix z = Matrix::from_rows({{-1.0, 0.0, 2.0}});
  const Matrix t = activate(ActivationKind::Tanh, z);
  CHECK(t(0, 0) == doctest::Approx(std::tanh(-1.0)));
  CHECK(t(0, 1) == 0.0);
  const Matrix l = activate(ActivationKind::Logistic, z);
  CHECK(l(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(1.0))));
  CHECK(l(0, 1) == 0.5);
  const Matrix r = activate(ActivationKind::Relu, z);
  CHECK(r(0, 0) == 0.0);
  CHECK(r(0, 2) == 2.0);
  CHECK(activate(ActivationKind::Identity, z) == z);

  const Matrix td = activate_derivative(ActivationKind::Tanh, z);
  CHECK(td(0, 2) == doctest::Approx(1.0 - std::tanh(2.0) * std::tanh(2.0)));
  const Matrix ld = activate_derivative(ActivationKind::Logistic, z);
  CHECK(ld(0, 1) == doctest::Approx(0.25));
  const Matrix rd = activate_derivative(ActivationKind::Relu, z);
  CHECK(rd(0, 0) == 0.0);
  CHECK(rd(0, 1) == 0.0);  // subgradient at zero fixed to 0
  CHECK(rd(0, 2) == 1.0);
  CHECK_THROWS_AS(activate_derivative(ActivationKind::Softmax, z), unsupported_error);
}

TEST_CASE("logistic is stable for extreme inputs") {
  const Matrix z = Matrix::from_rows({{-800.0, 800.0}});
  const Matrix l = activate(ActivationKind::Logistic, z);
  CHECK(l(0, 0) == doctest::Approx(0.0));
  CHECK(l(0, 1) == doctest::Approx(1.0));
  CHECK(l.all_finite());
}

TEST_CASE("softmax rows are stable and normalized") {
  const Matrix z = Matrix::from_rows({{1000.0, 1000.0, 999.0}, {0.0, 0.0, 0.0}});
  const Matrix s = softmax_rows(z);
  REQUIRE(s.all_finite());
  for (std::size_t i = 0; i < s.rows; ++i) {
    double total = 0;
    for (std::size_t j = 0; j < s.cols; ++j) total += s(i, j);
    CHECK(total == doctest::Approx(1.0));
  }
  CHECK(s(1, 0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("activate rejects non-finite input") {
  Matrix z(1, 2);
  z(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(activate(ActivationKind::Tanh, z), data_error);
}

TEST_CASE("activation names round-trip") {
  for (ActivationKind k : {ActivationKind::Tanh, ActivationKind::Logistic, ActivationKind::Relu,
                           ActivationKind::Identity, ActivationKind::Softmax})
    CHECK(activation_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(activation_from_string("swish"), config_error);
}

TEST_CASE("rng determinism and ranges") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform01();
    CHECK(u == b.uniform01());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
  CHECK(mix_seed(1, 2) != mix_seed(1, 3));
  Rng c(7);
  double mean = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += c.normal();
  mean /= n;
  CHECK(std::fabs(mean) < 0.05);
}
