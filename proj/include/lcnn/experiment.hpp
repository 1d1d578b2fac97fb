#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcnn/data.hpp"
#include "lcnn/network.hpp"
#include "lcnn/objective.hpp"
#include "lcnn/stats.hpp"
#include "lcnn/training.hpp"

#include "json.hpp"

namespace lcnn {

struct GridSpec {
  std::vector<double> c_values;            // weight decay candidates
  std::vector<double> d_values;            // pre-activation penalty candidates
  std::vector<std::size_t> hidden_widths;  // single hidden layer widths
  std::vector<double> dropout_values;
};

// Decade grids C in [1e-3, 10], D in [1e-9, 1e-3].
GridSpec default_grid();

struct CvResult {
  double mean = 0.0;
  double stddev = 0.0;
  double mean_seconds = 0.0;
  std::vector<double> fold_scores;  // completed folds only, repeat-major
  std::size_t failed_folds = 0;     // diverged folds, excluded from the aggregate
};

// Hidden widths may be empty for a linear classifier. Scaling is fitted per
// fold on the training rows only. Deterministic per seed.
CvResult cross_validate(const Dataset& ds, const ObjectiveSpec& spec,
                        const std::vector<std::size_t>& hidden, std::size_t folds,
                        std::size_t repeats, std::uint64_t seed, const TrainSchedule& schedule);

struct GridEntry {
  ObjectiveSpec spec;
  std::size_t hidden_width = 0;
  CvResult cv;
};

struct GridResult {
  GridEntry best;
  std::vector<GridEntry> table;
};

// Evaluates the grid's product with cross_validate; only knobs active in the
// base spec are searched (inactive ones stay 0). Ties prefer smaller D, then
// smaller C, then smaller width, then smaller dropout.
GridResult grid_search(const Dataset& ds, const GridSpec& grid, const ObjectiveSpec& base,
                       std::size_t folds, std::size_t repeats, std::uint64_t seed,
                       const TrainSchedule& schedule);

// Builds the classifier for a dataset: tanh hidden layers, output width and
// activation chosen by the loss (K = 2 squared error uses one tanh unit,
// softmax uses K logits).
Network network_for(std::size_t input_width, const std::vector<std::size_t>& hidden,
                    std::size_t k_classes, LossKind loss, std::uint64_t seed);

struct ProbeRow {
  std::size_t size = 0;
  double seconds = 0.0;
  double accuracy = 0.0;
};

// Trains on nested prefixes of one fixed shuffle, evaluating on a held-out
// tail.
std::vector<ProbeRow> scalability_probe(const Dataset& ds, const std::vector<std::size_t>& sizes,
                                        const ObjectiveSpec& spec,
                                        const std::vector<std::size_t>& hidden,
                                        const TrainSchedule& schedule, std::uint64_t seed);

struct ExperimentOutcome {
  std::string out_dir;
  nlohmann::json results;
};

// Full pipeline from a JSON manifest: load/impute datasets, per-method
// (optionally grid-searched) repeated CV, Friedman + pairwise Wilcoxon when
// enough datasets, bundle written under out_dir. All JSON outputs are
// deterministic per master seed; wall-clock times go only to CSV and the log.
ExperimentOutcome run_experiment(const std::string& manifest_path,
                                 const std::string& out_dir_override = "");

}  // namespace lcnn
