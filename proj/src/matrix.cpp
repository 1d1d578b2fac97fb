#include "lcnn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "lcnn/error.hpp"

namespace lcnn {

namespace {

// Below this many multiply-adds the parallel region is pure overhead.
constexpr std::size_t kParallelCutoff = 32768;

void check_finite_input(const Matrix& x, const char* what) {
  if (!x.all_finite()) throw data_error(std::string(what) + ": non-finite entries");
}

}  // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rws) {
  Matrix m;
  m.rows = rws.size();
  m.cols = rws.size() ? rws.begin()->size() : 0;
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : rws) {
    if (r.size() != m.cols) throw shape_error("from_rows: ragged rows");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw shape_error("matmul: inner dimensions disagree");
  Matrix c(a.rows, b.cols, 0.0);
  const std::int64_t m = static_cast<std::int64_t>(a.rows);
  const std::size_t k = a.cols, n = b.cols;
  const bool par = a.rows * k * n >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a.row_ptr(static_cast<std::size_t>(i));
    double* crow = c.row_ptr(static_cast<std::size_t>(i));
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = b.row_ptr(p);
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw shape_error("matmul_at_b: row counts disagree");
  Matrix c(a.cols, b.cols, 0.0);
  const std::int64_t k = static_cast<std::int64_t>(a.cols);
  const std::size_t m = a.rows, n = b.cols;
  const bool par = a.cols * m * n >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t p = 0; p < k; ++p) {
    double* crow = c.row_ptr(static_cast<std::size_t>(p));
    for (std::size_t i = 0; i < m; ++i) {
      const double aip = a(i, static_cast<std::size_t>(p));
      const double* brow = b.row_ptr(i);
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw shape_error("matmul_a_bt: column counts disagree");
  Matrix c(a.rows, b.rows, 0.0);
  const std::int64_t m = static_cast<std::int64_t>(a.rows);
  const std::size_t k = a.cols, n = b.rows;
  const bool par = a.rows * k * n >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a.row_ptr(static_cast<std::size_t>(i));
    double* crow = c.row_ptr(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.row_ptr(j);
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
  return c;
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw shape_error("matmul: inner dimensions disagree");
  Matrix c(a.rows, b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) acc += a(i, p) * b(p, j);
      c(i, j) = acc;
    }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw shape_error("matmul_at_b: row counts disagree");
  Matrix c(a.cols, b.cols, 0.0);
  for (std::size_t p = 0; p < a.cols; ++p)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < a.rows; ++i) acc += a(i, p) * b(i, j);
      c(p, j) = acc;
    }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw shape_error("matmul_a_bt: column counts disagree");
  Matrix c(a.rows, b.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) acc += a(i, p) * b(j, p);
      c(i, j) = acc;
    }
  return c;
}

}  // namespace serial

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw shape_error("add: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
  return c;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw shape_error("subtract: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw shape_error("hadamard: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.data) v *= s;
  return c;
}

void axpy_inplace(Matrix& y, double alpha, const Matrix& x) {
  if (!y.same_shape(x)) throw shape_error("axpy: shape mismatch");
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += alpha * x.data[i];
}

Matrix add_row_broadcast(const Matrix& a, const Matrix& row) {
  if (row.rows != 1 || row.cols != a.cols) throw shape_error("add_row_broadcast: row shape mismatch");
  Matrix c = a;
  const std::int64_t m = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static) if (a.size() >= kParallelCutoff)
  for (std::int64_t i = 0; i < m; ++i) {
    double* crow = c.row_ptr(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < a.cols; ++j) crow[j] += row.data[j];
  }
  return c;
}

Matrix column_sums(const Matrix& a) {
  Matrix s(1, a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row_ptr(i);
    for (std::size_t j = 0; j < a.cols; ++j) s.data[j] += arow[j];
  }
  return s;
}

double sum_squares(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.data) acc += v * v;
  return acc;
}

double sum_abs(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.data) acc += std::fabs(v);
  return acc;
}

double row_norm(const Matrix& a, std::size_t i) {
  double acc = 0.0;
  const double* r = a.row_ptr(i);
  for (std::size_t j = 0; j < a.cols; ++j) acc += r[j] * r[j];
  return std::sqrt(acc);
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Logistic: return "logistic";
    case ActivationKind::Relu: return "relu";
    case ActivationKind::Identity: return "identity";
    case ActivationKind::Softmax: return "softmax";
  }
  throw error("unknown activation kind");
}

ActivationKind activation_from_string(const std::string& name) {
  if (name == "tanh") return ActivationKind::Tanh;
  if (name == "logistic" || name == "sigmoid") return ActivationKind::Logistic;
  if (name == "relu") return ActivationKind::Relu;
  if (name == "identity" || name == "linear") return ActivationKind::Identity;
  if (name == "softmax") return ActivationKind::Softmax;
  throw config_error("unknown activation: " + name);
}

Matrix activate(ActivationKind kind, const Matrix& x) {
  check_finite_input(x, "activate");
  if (kind == ActivationKind::Softmax) return softmax_rows(x);
  Matrix y = x;
  const std::int64_t n = static_cast<std::int64_t>(y.size());
  const bool par = y.size() >= kParallelCutoff;
  switch (kind) {
    case ActivationKind::Tanh:
#pragma omp parallel for schedule(static) if (par)
      for (std::int64_t i = 0; i < n; ++i) y.data[static_cast<std::size_t>(i)] = std::tanh(y.data[static_cast<std::size_t>(i)]);
      break;
    case ActivationKind::Logistic:
#pragma omp parallel for schedule(static) if (par)
      for (std::int64_t i = 0; i < n; ++i) {
        const double v = y.data[static_cast<std::size_t>(i)];
        y.data[static_cast<std::size_t>(i)] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      }
      break;
    case ActivationKind::Relu:
#pragma omp parallel for schedule(static) if (par)
      for (std::int64_t i = 0; i < n; ++i) y.data[static_cast<std::size_t>(i)] = std::max(0.0, y.data[static_cast<std::size_t>(i)]);
      break;
    case ActivationKind::Identity:
      break;
    case ActivationKind::Softmax:
      break;  // handled above
  }
  return y;
}

Matrix activate_derivative(ActivationKind kind, const Matrix& x) {
  check_finite_input(x, "activate_derivative");
  Matrix y = x;
  switch (kind) {
    case ActivationKind::Tanh:
      for (double& v : y.data) {
        const double t = std::tanh(v);
        v = 1.0 - t * t;
      }
      break;
    case ActivationKind::Logistic:
      for (double& v : y.data) {
        const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        v = s * (1.0 - s);
      }
      break;
    case ActivationKind::Relu:
      for (double& v : y.data) v = v > 0.0 ? 1.0 : 0.0;
      break;
    case ActivationKind::Identity:
      for (double& v : y.data) v = 1.0;
      break;
    case ActivationKind::Softmax:
      throw unsupported_error("softmax has no stand-alone element-wise derivative");
  }
  return y;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  const std::int64_t m = static_cast<std::int64_t>(p.rows);
#pragma omp parallel for schedule(static) if (p.size() >= kParallelCutoff)
  for (std::int64_t i = 0; i < m; ++i) {
    double* row = p.row_ptr(static_cast<std::size_t>(i));
    double mx = row[0];
    for (std::size_t j = 1; j < p.cols; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    for (std::size_t j = 0; j < p.cols; ++j) row[j] /= z;
  }
  return p;
}

}  // namespace lcnn
