#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lcnn/matrix.hpp"

namespace lcnn {

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-) over signed ranks of nonzero differences
  double p_value = 1.0;    // two-sided
  bool significant_at_05 = false;
  std::size_t n_effective = 0;  // pairs left after dropping zero differences
  bool exact = false;           // enumeration branch (n <= 12) vs normal approximation
};

// Zero differences dropped; fewer than 5 remaining, or none, is a stat error.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

struct FriedmanResult {
  double chi_squared = 0.0;
  double p_value = 1.0;
  std::size_t datasets = 0, methods = 0;
};

// scores: datasets x methods, complete. Rows ranked with average ranks on
// ties (rank 1 = best = highest score); p from the chi-squared upper tail
// with methods-1 degrees of freedom.
FriedmanResult friedman_test(const Matrix& scores);

// Regularized upper incomplete gamma Q(dof/2, x/2).
double chi_squared_upper_tail(double x, std::size_t dof);

// Average ranks of one row; descending = true gives rank 1 to the largest.
std::vector<double> average_ranks(const std::vector<double>& values, bool descending);

// Values below the tail resolution render as "<1e-12".
std::string format_p_value(double p);

}  // namespace lcnn
