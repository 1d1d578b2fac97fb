#include "lcnn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lcnn/capacity.hpp"
#include "lcnn/error.hpp"
#include "lcnn/rng.hpp"

namespace lcnn {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::pair<double, double> mean_stddev(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace

GridSpec default_grid() {
  GridSpec g;
  g.c_values = {1e-3, 1e-2, 1e-1, 1.0, 10.0};
  g.d_values = {1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3};
  g.dropout_values = {0.1, 0.25, 0.5};
  return g;
}

Network network_for(std::size_t input_width, const std::vector<std::size_t>& hidden,
                    std::size_t k_classes, LossKind loss, std::uint64_t seed) {
  if (k_classes < 2) throw data_error("classification needs at least 2 classes");
  std::vector<std::size_t> widths;
  widths.push_back(input_width);
  for (std::size_t h : hidden) widths.push_back(h);
  ActivationKind output;
  if (loss == LossKind::SoftmaxCrossEntropy) {
    widths.push_back(k_classes);
    output = ActivationKind::Softmax;
  } else {
    widths.push_back(k_classes == 2 ? 1 : k_classes);
    output = ActivationKind::Tanh;
  }
  return init_network(make_config(widths, ActivationKind::Tanh, output, seed));
}

CvResult cross_validate(const Dataset& ds, const ObjectiveSpec& spec,
                        const std::vector<std::size_t>& hidden, std::size_t folds,
                        std::size_t repeats, std::uint64_t seed, const TrainSchedule& schedule) {
  validate_spec(spec, TaskKind::Classifier);
  if (ds.size() == 0) throw data_error("empty dataset");
  if (ds.has_missing()) throw data_error("impute missing values before cross-validation");
  if (folds < 2 || folds > ds.size()) throw config_error("folds must lie in [2, M]");
  if (repeats < 1) throw config_error("repeats must be positive");

  CvResult result;
  std::vector<double> times;
  for (const FoldSplit& split : kfold_split(ds.size(), folds, repeats, seed)) {
    const ScalingParams scaling = fit_scaling(ds.features, split.train);
    const Matrix x_train = apply_scaling(select_rows(ds.features, split.train), scaling);
    const Matrix x_val = apply_scaling(select_rows(ds.features, split.validation), scaling);
    const std::vector<int> train_labels = select_labels(ds.labels, split.train);
    const std::vector<int> val_labels = select_labels(ds.labels, split.validation);
    const Targets y_train = encode_targets(train_labels, ds.k_classes, spec.loss);

    const std::uint64_t fold_seed = mix_seed(seed, split.repeat * folds + split.fold);
    Network net = network_for(ds.feature_count(), hidden, ds.k_classes, spec.loss,
                              mix_seed(fold_seed, 1));
    TrainSchedule sched = schedule;
    sched.shuffle_seed = mix_seed(fold_seed, 2);
    sched.batch_size = std::min(sched.batch_size, x_train.rows);

    const TrainReport report = sgd_train(std::move(net), x_train, y_train, spec, sched);
    if (report.diverged) {
      ++result.failed_folds;
      continue;
    }
    result.fold_scores.push_back(accuracy(report.final_net, x_val, val_labels));
    times.push_back(report.total_seconds);
  }
  const auto [mean, stddev] = mean_stddev(result.fold_scores);
  result.mean = mean;
  result.stddev = stddev;
  result.mean_seconds = mean_stddev(times).first;
  return result;
}

GridResult grid_search(const Dataset& ds, const GridSpec& grid, const ObjectiveSpec& base,
                       std::size_t folds, std::size_t repeats, std::uint64_t seed,
                       const TrainSchedule& schedule) {
  validate_spec(base, TaskKind::Classifier);
  if (grid.hidden_widths.empty()) throw config_error("grid needs at least one hidden width");

  auto sorted = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  const std::vector<double> cs =
      base.weight_decay > 0 && !grid.c_values.empty() ? sorted(grid.c_values)
                                                      : std::vector<double>{base.weight_decay};
  const std::vector<double> dsv =
      base.lcnn_mode != LcnnMode::Off && !grid.d_values.empty() ? sorted(grid.d_values)
                                                                : std::vector<double>{base.lcnn_d};
  const std::vector<double> drops =
      base.dropout_rate > 0 && !grid.dropout_values.empty() ? sorted(grid.dropout_values)
                                                            : std::vector<double>{base.dropout_rate};
  std::vector<std::size_t> widths = grid.hidden_widths;
  std::sort(widths.begin(), widths.end());

  GridResult result;
  bool have_best = false;
  for (std::size_t width : widths)
    for (double drop : drops)
      for (double c : cs)
        for (double d : dsv) {
          GridEntry entry;
          entry.spec = base;
          entry.spec.weight_decay = c;
          entry.spec.lcnn_d = d;
          entry.spec.dropout_rate = drop;
          entry.hidden_width = width;
          entry.cv = cross_validate(ds, entry.spec, {width}, folds, repeats, seed, schedule);
          const auto key = [](const GridEntry& e) {
            return std::make_tuple(-e.cv.mean, e.spec.lcnn_d, e.spec.weight_decay, e.hidden_width,
                                   e.spec.dropout_rate);
          };
          if (!have_best || key(entry) < key(result.best)) {
            result.best = entry;
            have_best = true;
          }
          result.table.push_back(std::move(entry));
        }
  return result;
}

std::vector<ProbeRow> scalability_probe(const Dataset& ds, const std::vector<std::size_t>& sizes,
                                        const ObjectiveSpec& spec,
                                        const std::vector<std::size_t>& hidden,
                                        const TrainSchedule& schedule, std::uint64_t seed) {
  validate_spec(spec, TaskKind::Classifier);
  if (sizes.empty()) throw config_error("probe needs at least one training size");
  const std::size_t largest = *std::max_element(sizes.begin(), sizes.end());
  if (largest >= ds.size()) throw config_error("largest probe size leaves no held-out tail");
  if (*std::min_element(sizes.begin(), sizes.end()) == 0)
    throw config_error("probe sizes must be positive");

  std::vector<std::size_t> order = iota_indices(ds.size());
  Rng rng(mix_seed(seed, 0));
  rng.shuffle(order);
  const std::vector<std::size_t> tail(order.begin() + static_cast<std::ptrdiff_t>(largest),
                                      order.end());

  std::vector<ProbeRow> rows;
  for (std::size_t size : sizes) {
    const std::vector<std::size_t> head(order.begin(),
                                        order.begin() + static_cast<std::ptrdiff_t>(size));
    const ScalingParams scaling = fit_scaling(ds.features, head);
    const Matrix x_train = apply_scaling(select_rows(ds.features, head), scaling);
    const Matrix x_tail = apply_scaling(select_rows(ds.features, tail), scaling);
    const Targets y_train =
        encode_targets(select_labels(ds.labels, head), ds.k_classes, spec.loss);

    Network net =
        network_for(ds.feature_count(), hidden, ds.k_classes, spec.loss, mix_seed(seed, 1));
    TrainSchedule sched = schedule;
    sched.shuffle_seed = mix_seed(seed, 2);
    sched.batch_size = std::min(sched.batch_size, x_train.rows);
    sched.telemetry = false;

    const auto t0 = std::chrono::steady_clock::now();
    const TrainReport report = sgd_train(std::move(net), x_train, y_train, spec, sched);
    ProbeRow row;
    row.size = size;
    row.seconds = seconds_since(t0);
    row.accuracy = report.diverged
                       ? 0.0
                       : accuracy(report.final_net, x_tail, select_labels(ds.labels, tail));
    rows.push_back(row);
  }
  return rows;
}

namespace {

Dataset truncate_dataset(Dataset ds, std::size_t limit) {
  if (limit == 0 || limit >= ds.size()) return ds;
  std::vector<std::size_t> head(limit);
  for (std::size_t i = 0; i < limit; ++i) head[i] = i;
  ds.features = select_rows(ds.features, head);
  ds.labels.resize(limit);
  if (!ds.missing_mask.empty()) ds.missing_mask.resize(limit * ds.features.cols);
  int max_label = 0;
  for (int l : ds.labels) max_label = std::max(max_label, l);
  if (static_cast<std::size_t>(max_label) + 1 < ds.k_classes)
    throw data_error("limit drops every example of some class");
  return ds;
}

Dataset dataset_from_manifest(const nlohmann::json& entry, const std::string& base_dir) {
  const std::string kind = entry.value("kind", "csv");
  Dataset ds;
  if (kind == "csv") {
    CsvSchema schema;
    if (entry.contains("label_column")) schema.label_column = entry.at("label_column");
    schema.label_index = entry.value("label_index", -1);
    schema.missing_token = entry.value("missing_token", "?");
    schema.has_header = entry.value("has_header", true);
    const std::string delim = entry.value("delimiter", ",");
    if (delim.size() != 1) throw config_error("delimiter must be a single character");
    schema.delimiter = delim[0];
    std::filesystem::path p = entry.at("path").get<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    ds = load_csv(p.string(), schema);
  } else if (kind == "synthetic") {
    const std::string gen = entry.value("generator", "blobs");
    if (gen == "blobs") {
      ds = synthetic_blobs(entry.value("samples", std::size_t{120}),
                           entry.value("features", std::size_t{4}),
                           entry.value("classes", std::size_t{3}), entry.value("spread", 0.25),
                           entry.value("seed", std::uint64_t{1}));
    } else if (gen == "rings") {
      ds = synthetic_rings(entry.value("samples", std::size_t{120}),
                           entry.value("seed", std::uint64_t{1}));
    } else {
      throw config_error("unknown synthetic generator: " + gen);
    }
  } else if (kind == "idx") {
    std::filesystem::path imgs = entry.at("images").get<std::string>();
    std::filesystem::path labs = entry.at("labels").get<std::string>();
    if (imgs.is_relative()) imgs = std::filesystem::path(base_dir) / imgs;
    if (labs.is_relative()) labs = std::filesystem::path(base_dir) / labs;
    ds.features = load_idx_images(imgs.string());
    ds.labels = load_idx_labels(labs.string());
    if (ds.labels.size() != ds.features.rows)
      throw data_error("image and label counts differ");
    int max_label = 0;
    for (int l : ds.labels) max_label = std::max(max_label, l);
    ds.k_classes = static_cast<std::size_t>(max_label) + 1;
    for (std::size_t c = 0; c < ds.k_classes; ++c) ds.class_names.push_back(std::to_string(c));
  } else {
    throw config_error("unknown dataset kind: " + kind);
  }
  ds = truncate_dataset(std::move(ds), entry.value("limit", std::size_t{0}));
  if (ds.has_missing()) ds = knn_impute(ds, entry.value("impute_k", std::size_t{5}));
  return ds;
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

GridSpec grid_from_manifest(const nlohmann::json& g, const std::vector<std::size_t>& hidden) {
  GridSpec grid = default_grid();
  if (g.contains("C")) grid.c_values = g.at("C").get<std::vector<double>>();
  if (g.contains("D")) grid.d_values = g.at("D").get<std::vector<double>>();
  if (g.contains("dropout")) grid.dropout_values = g.at("dropout").get<std::vector<double>>();
  if (g.contains("hidden")) {
    grid.hidden_widths = g.at("hidden").get<std::vector<std::size_t>>();
  } else if (hidden.size() == 1) {
    grid.hidden_widths = {hidden[0]};
  } else {
    throw config_error("grid search needs hidden widths (single hidden layer)");
  }
  return grid;
}

}  // namespace

ExperimentOutcome run_experiment(const std::string& manifest_path,
                                 const std::string& out_dir_override) {
  std::ifstream in(manifest_path);
  if (!in) throw config_error("cannot open manifest " + manifest_path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("manifest is not valid JSON: ") + e.what());
  }

  const std::uint64_t master_seed = manifest.value("master_seed", std::uint64_t{1});
  const std::size_t folds = manifest.value("folds", std::size_t{5});
  const std::size_t repeats = manifest.value("repeats", std::size_t{1});
  TrainSchedule schedule;
  if (manifest.contains("schedule")) schedule = schedule_from_json(manifest.at("schedule"));
  std::vector<std::size_t> hidden{8};
  if (manifest.contains("hidden")) hidden = manifest.at("hidden").get<std::vector<std::size_t>>();
  if (!manifest.contains("datasets") || !manifest.at("datasets").is_array() ||
      manifest.at("datasets").empty())
    throw config_error("manifest needs a non-empty datasets array");
  if (!manifest.contains("methods") || !manifest.at("methods").is_array() ||
      manifest.at("methods").empty())
    throw config_error("manifest needs a non-empty methods array");

  const std::string out_dir = !out_dir_override.empty()
                                  ? out_dir_override
                                  : manifest.value("output_dir", std::string("runs/experiment"));
  const std::filesystem::path base_dir =
      std::filesystem::path(manifest_path).has_parent_path()
          ? std::filesystem::path(manifest_path).parent_path()
          : std::filesystem::path(".");
  std::filesystem::create_directories(std::filesystem::path(out_dir) / "reports");

  std::ostringstream log;
  const auto wall0 = std::chrono::steady_clock::now();

  struct MethodEntry {
    std::string name;
    ObjectiveSpec spec;
  };
  std::vector<MethodEntry> methods;
  for (const nlohmann::json& m : manifest.at("methods")) {
    MethodEntry entry;
    entry.spec = spec_from_json(m.at("objective"));
    validate_spec(entry.spec, TaskKind::Classifier);
    entry.name = m.value("name", spec_label(entry.spec));
    methods.push_back(std::move(entry));
  }
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = i + 1; j < methods.size(); ++j)
      if (methods[i].name == methods[j].name)
        throw config_error("duplicate method name: " + methods[i].name);

  struct DatasetEntry {
    std::string name;
    Dataset ds;
  };
  std::vector<DatasetEntry> datasets;
  for (const nlohmann::json& d : manifest.at("datasets")) {
    DatasetEntry entry;
    entry.name = d.value("name", std::string("dataset") + std::to_string(datasets.size()));
    entry.ds = dataset_from_manifest(d, base_dir.string());
    log << "[data] " << entry.name << ": " << entry.ds.size() << " rows, "
        << entry.ds.feature_count() << " features, " << entry.ds.k_classes << " classes\n";
    datasets.push_back(std::move(entry));
  }
  for (std::size_t i = 0; i < datasets.size(); ++i)
    for (std::size_t j = i + 1; j < datasets.size(); ++j)
      if (datasets[i].name == datasets[j].name)
        throw config_error("duplicate dataset name: " + datasets[i].name);

  const bool use_grid = manifest.contains("grid");
  GridSpec grid;
  if (use_grid) grid = grid_from_manifest(manifest.at("grid"), hidden);

  nlohmann::json results;
  results["master_seed"] = master_seed;
  results["folds"] = folds;
  results["repeats"] = repeats;
  nlohmann::json ds_meta = nlohmann::json::array();
  for (const DatasetEntry& d : datasets)
    ds_meta.push_back({{"name", d.name},
                       {"samples", d.ds.size()},
                       {"features", d.ds.feature_count()},
                       {"classes", d.ds.k_classes}});
  results["datasets"] = std::move(ds_meta);
  nlohmann::json method_names = nlohmann::json::array();
  for (const MethodEntry& m : methods) method_names.push_back(m.name);
  results["methods"] = std::move(method_names);

  std::ostringstream table_csv, timing_csv;
  table_csv << "dataset,method,mean_accuracy,stddev,failed_folds\n";
  timing_csv << "dataset,method,mean_fold_seconds\n";

  Matrix score_matrix(datasets.size(), methods.size());
  nlohmann::json cells;
  for (std::size_t di = 0; di < datasets.size(); ++di) {
    const DatasetEntry& d = datasets[di];
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const MethodEntry& m = methods[mi];
      const std::uint64_t cell_seed = mix_seed(mix_seed(master_seed, di + 1), mi + 1);

      ObjectiveSpec chosen = m.spec;
      std::vector<std::size_t> chosen_hidden = hidden;
      CvResult cv;
      nlohmann::json cell;
      if (use_grid) {
        const GridResult gr = grid_search(d.ds, grid, m.spec, folds, repeats, cell_seed, schedule);
        chosen = gr.best.spec;
        chosen_hidden = {gr.best.hidden_width};
        cv = gr.best.cv;
        nlohmann::json table = nlohmann::json::array();
        for (const GridEntry& e : gr.table)
          table.push_back({{"objective", spec_to_json(e.spec)},
                           {"hidden", e.hidden_width},
                           {"mean", e.cv.mean},
                           {"stddev", e.cv.stddev},
                           {"failed_folds", e.cv.failed_folds}});
        cell["grid"] = std::move(table);
      } else {
        cv = cross_validate(d.ds, chosen, chosen_hidden, folds, repeats, cell_seed, schedule);
      }

      cell["objective"] = spec_to_json(chosen);
      cell["hidden"] = chosen_hidden;
      cell["mean"] = cv.mean;
      cell["stddev"] = cv.stddev;
      cell["failed_folds"] = cv.failed_folds;
      cell["fold_scores"] = cv.fold_scores;
      score_matrix(di, mi) = cv.mean;

      log << "[cv] " << d.name << " / " << m.name << ": mean=" << cv.mean
          << " std=" << cv.stddev << " failed=" << cv.failed_folds << " ("
          << cv.mean_seconds << "s per fold)\n";
      table_csv << d.name << "," << m.name << "," << cv.mean << "," << cv.stddev << ","
                << cv.failed_folds << "\n";
      timing_csv << d.name << "," << m.name << "," << cv.mean_seconds << "\n";

      const ScalingParams scaling = fit_scaling(d.ds.features, iota_indices(d.ds.size()));
      const Matrix x_full = apply_scaling(d.ds.features, scaling);
      const Targets y_full = encode_targets(d.ds.labels, d.ds.k_classes, chosen.loss);
      Network net = network_for(d.ds.feature_count(), chosen_hidden, d.ds.k_classes, chosen.loss,
                                mix_seed(cell_seed, 77));
      TrainSchedule final_sched = schedule;
      final_sched.shuffle_seed = mix_seed(cell_seed, 78);
      final_sched.batch_size = std::min(final_sched.batch_size, x_full.rows);
      const TrainReport report = sgd_train(std::move(net), x_full, y_full, chosen, final_sched);
      if (report.diverged) log << "[train] " << d.name << " / " << m.name << " diverged\n";

      const std::string stem = sanitize(d.name) + "__" + sanitize(m.name);
      write_json(std::filesystem::path(out_dir) / "reports" / (stem + "_train.json"),
                 train_report_to_json(report, false, false));
      const ForwardTrace trace = forward(report.final_net, x_full);
      const CapacityReport capacity = vc_bound(report.final_net, trace, chosen.target_magnitude);
      write_json(std::filesystem::path(out_dir) / "reports" / (stem + "_capacity.json"),
                 capacity_report_to_json(capacity));
      cell["final_train_accuracy"] = accuracy(report.final_net, x_full, d.ds.labels);
      cell["capacity_gamma"] = capacity.gamma_bound;

      cells[d.name][m.name] = std::move(cell);
    }
  }
  results["cells"] = std::move(cells);

  if (datasets.size() >= 2 && methods.size() >= 2) {
    const FriedmanResult fr = friedman_test(score_matrix);
    results["friedman"] = {{"chi_squared", fr.chi_squared},
                           {"p_value", fr.p_value},
                           {"p_display", format_p_value(fr.p_value)},
                           {"datasets", fr.datasets},
                           {"methods", fr.methods}};
    log << "[stats] friedman chi2=" << fr.chi_squared << " p=" << format_p_value(fr.p_value)
        << "\n";
  } else {
    results["friedman"] = {{"notice", "needs at least 2 datasets and 2 methods"}};
    log << "[stats] friedman skipped: needs at least 2 datasets and 2 methods\n";
  }

  nlohmann::json wilcoxon = nlohmann::json::array();
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = i + 1; j < methods.size(); ++j) {
      std::vector<double> a(datasets.size()), b(datasets.size());
      for (std::size_t di = 0; di < datasets.size(); ++di) {
        a[di] = score_matrix(di, i);
        b[di] = score_matrix(di, j);
      }
      nlohmann::json pair = {{"methods", {methods[i].name, methods[j].name}}};
      try {
        const WilcoxonResult w = wilcoxon_signed_rank(a, b);
        pair["statistic"] = w.statistic;
        pair["p_value"] = w.p_value;
        pair["p_display"] = format_p_value(w.p_value);
        pair["n_effective"] = w.n_effective;
        pair["exact"] = w.exact;
        pair["significant_at_05"] = w.significant_at_05;
        log << "[stats] wilcoxon " << methods[i].name << " vs " << methods[j].name
            << ": W=" << w.statistic << " p=" << format_p_value(w.p_value) << "\n";
      } catch (const stat_error& e) {
        pair["notice"] = e.what();
        log << "[stats] wilcoxon " << methods[i].name << " vs " << methods[j].name
            << " skipped: " << e.what() << "\n";
      }
      wilcoxon.push_back(std::move(pair));
    }
  results["wilcoxon"] = std::move(wilcoxon);

  log << "[done] total " << seconds_since(wall0) << "s\n";
  write_json(std::filesystem::path(out_dir) / "results.json", results);
  write_text(std::filesystem::path(out_dir) / "table.csv", table_csv.str());
  write_text(std::filesystem::path(out_dir) / "timing.csv", timing_csv.str());
  write_text(std::filesystem::path(out_dir) / "run.log", log.str());

  ExperimentOutcome outcome;
  outcome.out_dir = out_dir;
  outcome.results = std::move(results);
  return outcome;
}

}  // namespace lcnn
