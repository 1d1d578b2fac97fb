#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcnn/matrix.hpp"
#include "lcnn/objective.hpp"

#include "json.hpp"

namespace lcnn {

struct CsvSchema {
  std::string label_column;  // by name (needs a header) or empty to use label_index
  int label_index = -1;      // 0-based column, -1 = last column
  std::string missing_token = "?";
  bool has_header = true;
  char delimiter = ',';
};

struct ScalingParams {
  std::vector<double> min, max;
  bool fitted() const { return !min.empty(); }
};

struct Dataset {
  Matrix features;
  std::vector<int> labels;  // dense indices in first-appearance order
  std::size_t k_classes = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::vector<std::uint8_t> missing_mask;  // row-major, parallel to features
  ScalingParams scaling;

  std::size_t size() const { return features.rows; }
  std::size_t feature_count() const { return features.cols; }
  bool has_missing() const;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);

// Each missing cell becomes the mean of that feature over the k nearest rows
// by Euclidean distance on mutually observed features (normalized by the
// shared count); ties broken by row index. Neighbor values are taken from the
// original observed data, so the result is idempotent.
Dataset knn_impute(const Dataset& ds, std::size_t k = 5);

ScalingParams fit_scaling(const Matrix& features, const std::vector<std::size_t>& rows);
// x' = 2 (x - min) / (max - min) - 1; constant features map to 0. Rows outside
// the fitted range may land outside [-1, 1].
Matrix apply_scaling(const Matrix& features, const ScalingParams& params);
Matrix inverse_scaling(const Matrix& scaled, const ScalingParams& params);

// K = 2: single +-1 column (class index 1 positive). K > 2 with squared
// error: M x K of +-1. Softmax loss carries labels only.
Targets encode_targets(const std::vector<int>& labels, std::size_t k, LossKind loss);

struct FoldSplit {
  std::size_t repeat = 0, fold = 0;
  std::vector<std::size_t> train, validation;
};

// Per repeat: seeded shuffle, then near-equal contiguous folds; every index
// appears in exactly one validation fold per repeat. Index sets are sorted.
std::vector<FoldSplit> kfold_split(std::size_t m, std::size_t folds, std::size_t repeats,
                                   std::uint64_t seed);

// max_i ||x_i|| over the chosen rows.
double input_radius(const Matrix& features, const std::vector<std::size_t>& rows);

Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& rows);
std::vector<int> select_labels(const std::vector<int>& labels, const std::vector<std::size_t>& rows);

// IDX files as used for the digit images: values returned raw in [0, 255].
Matrix load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);

// Gaussian class blobs around seeded centers; linearly separable for small
// spread.
Dataset synthetic_blobs(std::size_t samples, std::size_t features, std::size_t classes,
                        double spread, std::uint64_t seed);
// Two concentric annuli; not linearly separable in the raw coordinates.
Dataset synthetic_rings(std::size_t samples, std::uint64_t seed);

nlohmann::json dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const nlohmann::json& j);

}  // namespace lcnn
