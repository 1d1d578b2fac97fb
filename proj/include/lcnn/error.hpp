#pragma once

#include <stdexcept>
#include <string>

namespace lcnn {

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible matrix/vector dimensions.
struct shape_error : error {
  using error::error;
};

// Bad input values: non-finite features, out-of-range labels, empty batches.
struct data_error : error {
  using error::error;
};

// Invalid configuration: zero-width layers, M < folds, bad manifests.
struct config_error : error {
  using error::error;
};

// Objective/term combination not legal for the task.
struct spec_error : error {
  using error::error;
};

// Argument outside the mathematical domain of the operation.
struct domain_error : error {
  using error::error;
};

// Operation has no defined result for this kind (softmax derivative, relu inverse).
struct unsupported_error : error {
  using error::error;
};

// Classifier with zero weight vector has no margin.
struct degenerate_error : error {
  using error::error;
};

// Statistical test undefined on the given samples.
struct stat_error : error {
  using error::error;
};

// Training objective became non-finite.
struct divergence_error : error {
  using error::error;
};

}  // namespace lcnn
