#pragma once

#include <cstddef>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "lcnn/matrix.hpp"
#include "lcnn/network.hpp"

#include "json.hpp"

namespace lcnn {

using BigInt = boost::multiprecision::cpp_int;

// Number of linearly realizable dichotomies of M points in general position
// in R^n: 2^M when M < n+1, else 2 * sum_{i=0}^{n-1} C(M-1, i). Exact.
BigInt dichotomy_count(std::size_t m, std::size_t n);

// min_i |beta . u_i| / ||beta|| over the rows of augmented.
double geometric_margin(const Matrix& augmented, const std::vector<double>& beta);

// max_i ||u_i|| over the rows (origin-centered radius).
double enclosing_radius(const Matrix& augmented);

// f^-1(t) for the output activation; tanh and logistic have closed forms,
// identity returns t, relu and softmax have no usable inverse.
double theta_from_target(ActivationKind kind, double t);

// (V_max - V_min) / ||w|| over one output unit's activation values.
double range_margin(const Matrix& outputs, std::size_t column, const std::vector<double>& w);

struct ClassCapacity {
  double d = 0.0;
  double d_min = 0.0;
  double c_prime = 0.0;
  double c_bound = 0.0;  // 4 * c_prime
  double sum_sq_net = 0.0;
  double gamma_bound = 0.0;
  double range_margin = 0.0;
  bool non_separable = false;  // geometric margin collapsed to 0
};

struct CapacityReport {
  std::size_t m = 0;  // sample count
  std::size_t n = 0;  // penultimate width
  double r1 = 0.0;    // radius of augmented penultimate outputs
  double theta = 0.0;
  bool theta_available = true;  // false for softmax/relu outputs (theta fixed at 1)
  std::vector<ClassCapacity> per_class;
  // Headline values from the max-gamma class; sum_sq_net totals all classes.
  double d = 0.0;
  double d_min = 0.0;
  double c_prime = 0.0;
  double c_bound = 0.0;
  double sum_sq_net = 0.0;
  double gamma_bound = 0.0;
  double range_margin = 0.0;
  bool non_separable = false;
};

// gamma = 1 + min(4 C' sum_i net_i^2, n) with C' = R1^2 / (M d_min^2 theta^2),
// one bound per output unit (one-vs-rest for multiclass). d_min is the
// observed margin; d = 0 yields the vacuous gamma = 1 + n with the
// non_separable flag set.
CapacityReport vc_bound(const Network& net, const ForwardTrace& trace, double t);

nlohmann::json capacity_report_to_json(const CapacityReport& report);

// Perceptron-based linear separability test on the given representations;
// labels must take exactly two values. The update cap scales with the data
// size; exceeding it returns false.
bool separability_check(const Matrix& points, const std::vector<int>& labels);

}  // namespace lcnn
