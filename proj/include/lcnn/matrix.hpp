#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace lcnn {

// Dense row-major matrix of doubles. All numerics in the project run on this
// type; 64-bit throughout.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, rows*cols entries

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rws);
  static Matrix identity(std::size_t n);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row_ptr(std::size_t i) { return data.data() + i * cols; }
  const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  bool operator==(const Matrix& o) const = default;
};

// GEMM kernels. The public entry points run OpenMP-parallel over output rows;
// each output element is accumulated by exactly one thread in a fixed index
// order, so results are bit-identical for any thread count. The serial
// reference implementations (plain dot-product loops) live in lcnn::serial
// and are used by the tests and the kernel benchmark.

Matrix matmul(const Matrix& a, const Matrix& b);       // (m×k)·(k×n)
Matrix matmul_at_b(const Matrix& a, const Matrix& b);  // aᵀ·b, a (m×k), b (m×n) -> (k×n)
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);  // a·bᵀ, a (m×k), b (n×k) -> (m×n)

namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
}  // namespace serial

Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
void axpy_inplace(Matrix& y, double alpha, const Matrix& x);  // y += alpha*x
Matrix add_row_broadcast(const Matrix& a, const Matrix& row);  // row is 1×n
Matrix column_sums(const Matrix& a);                           // 1×n
double sum_squares(const Matrix& a);
double sum_abs(const Matrix& a);
double row_norm(const Matrix& a, std::size_t i);

// Activation-function catalog.
enum class ActivationKind { Tanh, Logistic, Relu, Identity, Softmax };

std::string to_string(ActivationKind kind);
ActivationKind activation_from_string(const std::string& name);

// Element-wise transform of pre-activations. Softmax is row-wise and uses
// max-subtraction for stability; its rows sum to 1.
Matrix activate(ActivationKind kind, const Matrix& x);

// Derivative evaluated at the same pre-activation. relu' at exactly 0 is 0.
// Softmax has no element-wise derivative; it is handled jointly with
// cross-entropy in the objective and requesting it here throws.
Matrix activate_derivative(ActivationKind kind, const Matrix& x);

Matrix softmax_rows(const Matrix& logits);

}  // namespace lcnn
