// Times the OpenMP kernels against the serial reference on square-ish GEMM
// shapes typical for minibatch training, and cross-checks the results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lcnn/matrix.hpp"
#include "lcnn/rng.hpp"

using namespace lcnn;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

template <typename F>
double time_best_of(F&& f, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, dt);
  }
  return best;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::fabs(a.data[i] - b.data[i]));
  return worst;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: not enabled\n");
#endif
  std::printf("%-22s %12s %12s %8s %12s\n", "shape", "serial_s", "parallel_s", "speedup",
              "max_diff");

  Rng rng(99);
  const std::size_t shapes[][3] = {
      {64, 784, 196}, {256, 784, 196}, {1024, 784, 196}, {256, 196, 10}, {512, 512, 512}};
  for (const auto& s : shapes) {
    const Matrix a = random_matrix(s[0], s[1], rng);
    const Matrix b = random_matrix(s[1], s[2], rng);
    Matrix out_serial, out_parallel;
    const int reps = s[0] * s[1] * s[2] > (std::size_t{1} << 26) ? 3 : 7;
    const double ts = time_best_of([&] { out_serial = serial::matmul(a, b); }, reps);
    const double tp = time_best_of([&] { out_parallel = matmul(a, b); }, reps);
    char shape[64];
    std::snprintf(shape, sizeof shape, "%zux%zu * %zux%zu", s[0], s[1], s[1], s[2]);
    std::printf("%-22s %12.6f %12.6f %8.2f %12.3e\n", shape, ts, tp, ts / tp,
                max_abs_diff(out_serial, out_parallel));
  }

  const Matrix big_a = random_matrix(512, 640, rng);
  const Matrix big_b = random_matrix(512, 384, rng);
  Matrix r1, r2;
  const double t_at = time_best_of([&] { r1 = matmul_at_b(big_a, big_b); }, 5);
  const double t_at_ref = time_best_of([&] { r2 = serial::matmul_at_b(big_a, big_b); }, 5);
  std::printf("%-22s %12.6f %12.6f %8.2f %12.3e\n", "At*B 640x512*512x384", t_at_ref, t_at,
              t_at_ref / t_at, max_abs_diff(r1, r2));
  return 0;
}
