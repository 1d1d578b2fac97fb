#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lcnn/autoencoder.hpp"
#include "lcnn/capacity.hpp"
#include "lcnn/data.hpp"
#include "lcnn/error.hpp"
#include "lcnn/experiment.hpp"
#include "lcnn/network.hpp"
#include "lcnn/objective.hpp"
#include "lcnn/rng.hpp"
#include "lcnn/stats.hpp"
#include "lcnn/training.hpp"

namespace {

using namespace lcnn;

struct DataOpts {
  std::string csv;
  std::string label_column;
  int label_index = -1;
  std::string missing_token = "?";
  bool no_header = false;
  std::string generator;  // blobs | rings
  std::size_t samples = 150, features = 4, classes = 3;
  double spread = 0.3;
  std::uint64_t data_seed = 1;
  std::string idx_images, idx_labels;
  std::size_t limit = 0;
  std::size_t impute_k = 5;
};

void add_data_opts(CLI::App* cmd, DataOpts& d) {
  cmd->add_option("--data", d.csv, "dataset CSV path");
  cmd->add_option("--label-column", d.label_column, "label column name (default: last column)");
  cmd->add_option("--label-index", d.label_index, "label column index, overrides --label-column");
  cmd->add_option("--missing-token", d.missing_token, "token marking missing values");
  cmd->add_flag("--no-header", d.no_header, "CSV has no header row");
  cmd->add_option("--synthetic", d.generator, "synthetic generator: blobs or rings");
  cmd->add_option("--samples", d.samples, "synthetic sample count");
  cmd->add_option("--features", d.features, "synthetic feature count (blobs)");
  cmd->add_option("--classes", d.classes, "synthetic class count (blobs)");
  cmd->add_option("--spread", d.spread, "synthetic cluster spread (blobs)");
  cmd->add_option("--data-seed", d.data_seed, "synthetic generator seed");
  cmd->add_option("--idx-images", d.idx_images, "IDX image file (pairs with --idx-labels)");
  cmd->add_option("--idx-labels", d.idx_labels, "IDX label file");
  cmd->add_option("--limit", d.limit, "keep only the first N rows");
  cmd->add_option("--impute-k", d.impute_k, "neighbors for missing-value imputation");
}

Dataset load_dataset(const DataOpts& d) {
  Dataset ds;
  if (!d.csv.empty()) {
    CsvSchema schema;
    schema.label_column = d.label_column;
    schema.label_index = d.label_index;
    schema.missing_token = d.missing_token;
    schema.has_header = !d.no_header;
    ds = load_csv(d.csv, schema);
  } else if (d.generator == "blobs") {
    ds = synthetic_blobs(d.samples, d.features, d.classes, d.spread, d.data_seed);
  } else if (d.generator == "rings") {
    ds = synthetic_rings(d.samples, d.data_seed);
  } else if (!d.idx_images.empty() || !d.idx_labels.empty()) {
    if (d.idx_images.empty() || d.idx_labels.empty())
      throw config_error("--idx-images and --idx-labels come together");
    ds.features = load_idx_images(d.idx_images);
    ds.labels = load_idx_labels(d.idx_labels);
    if (ds.labels.size() != ds.features.rows) throw data_error("image and label counts differ");
    int max_label = 0;
    for (int l : ds.labels) max_label = std::max(max_label, l);
    ds.k_classes = static_cast<std::size_t>(max_label) + 1;
  } else {
    throw config_error("no dataset given: use --data, --synthetic, or --idx-images/--idx-labels");
  }
  if (d.limit > 0 && d.limit < ds.size()) {
    std::vector<std::size_t> head(d.limit);
    for (std::size_t i = 0; i < d.limit; ++i) head[i] = i;
    ds.features = select_rows(ds.features, head);
    ds.labels.resize(d.limit);
    if (!ds.missing_mask.empty()) ds.missing_mask.resize(d.limit * ds.features.cols);
  }
  if (ds.has_missing()) ds = knn_impute(ds, d.impute_k);
  return ds;
}

struct SpecOpts {
  std::string loss = "S";
  double weight_decay = 0.0;
  std::string lc_mode = "off";  // off | last | all
  double lc_d = 0.0;
  double dropout = 0.0;
  double target = 0.9;
};

void add_spec_opts(CLI::App* cmd, SpecOpts& s) {
  cmd->add_option("--loss", s.loss, "loss: SE (squared error) or S (softmax cross-entropy)");
  cmd->add_option("--weight-decay,--C", s.weight_decay, "L2 coefficient C");
  cmd->add_option("--lc-mode", s.lc_mode, "pre-activation penalty placement: off, last, all");
  cmd->add_option("--lc-d,--D", s.lc_d, "pre-activation penalty coefficient D");
  cmd->add_option("--dropout", s.dropout, "dropout rate on the last hidden layer");
  cmd->add_option("--target", s.target, "target magnitude t for SE encoding");
}

ObjectiveSpec make_spec(const SpecOpts& s) {
  ObjectiveSpec spec;
  if (s.loss == "SE")
    spec.loss = LossKind::SquaredError;
  else if (s.loss == "S")
    spec.loss = LossKind::SoftmaxCrossEntropy;
  else
    throw config_error("unknown loss: " + s.loss);
  spec.weight_decay = s.weight_decay;
  if (s.lc_mode == "off")
    spec.lcnn_mode = LcnnMode::Off;
  else if (s.lc_mode == "last")
    spec.lcnn_mode = LcnnMode::LastLayer;
  else if (s.lc_mode == "all")
    spec.lcnn_mode = LcnnMode::AllLayers;
  else
    throw config_error("unknown --lc-mode: " + s.lc_mode);
  spec.lcnn_d = s.lc_d;
  if (spec.lcnn_mode != LcnnMode::Off && spec.lcnn_d == 0.0)
    throw config_error("--lc-mode needs --lc-d > 0");
  if (spec.lcnn_d > 0.0 && spec.lcnn_mode == LcnnMode::Off) spec.lcnn_mode = LcnnMode::LastLayer;
  spec.dropout_rate = s.dropout;
  spec.target_magnitude = s.target;
  return spec;
}

struct ScheduleOpts {
  std::size_t epochs = 30, batch = 16;
  double lr = 0.1, decay = 1.0;
  std::uint64_t seed = 1;
  bool quiet = false;
};

void add_schedule_opts(CLI::App* cmd, ScheduleOpts& s) {
  cmd->add_option("--epochs", s.epochs, "training epochs");
  cmd->add_option("--batch", s.batch, "minibatch size");
  cmd->add_option("--lr", s.lr, "learning rate");
  cmd->add_option("--lr-decay", s.decay, "per-epoch learning rate multiplier");
  cmd->add_option("--shuffle-seed", s.seed, "epoch shuffle seed");
  cmd->add_flag("--quiet", s.quiet, "skip per-epoch telemetry");
}

TrainSchedule make_schedule(const ScheduleOpts& s) {
  TrainSchedule sched;
  sched.epochs = s.epochs;
  sched.batch_size = s.batch;
  sched.learning_rate = s.lr;
  sched.lr_decay = s.decay;
  sched.shuffle_seed = s.seed;
  sched.telemetry = !s.quiet;
  return sched;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(path + " is not valid JSON: " + e.what());
  }
  return j;
}

std::vector<std::size_t> parse_sizes(const std::string& list) {
  std::vector<std::size_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return out;
}

int run_train(const DataOpts& d, const SpecOpts& s, const ScheduleOpts& sc,
              const std::vector<std::size_t>& hidden, double val_fraction, std::uint64_t seed,
              const std::string& out_path, const std::string& csv_path, bool save_network) {
  const Dataset ds = load_dataset(d);
  const ObjectiveSpec spec = make_spec(s);
  if (val_fraction < 0 || val_fraction >= 1) throw config_error("--val-fraction must lie in [0,1)");

  std::vector<std::size_t> order = iota_indices(ds.size());
  Rng rng(mix_seed(seed, 0));
  rng.shuffle(order);
  const std::size_t val_m = static_cast<std::size_t>(val_fraction * static_cast<double>(ds.size()));
  if (ds.size() - val_m == 0) throw config_error("--val-fraction leaves no training rows");
  const std::vector<std::size_t> train_rows(order.begin(),
                                            order.end() - static_cast<std::ptrdiff_t>(val_m));
  const std::vector<std::size_t> val_rows(order.end() - static_cast<std::ptrdiff_t>(val_m),
                                          order.end());

  const ScalingParams scaling = fit_scaling(ds.features, train_rows);
  const Matrix x_train = apply_scaling(select_rows(ds.features, train_rows), scaling);
  const Targets y_train =
      encode_targets(select_labels(ds.labels, train_rows), ds.k_classes, spec.loss);

  Network net = network_for(ds.feature_count(), hidden, ds.k_classes, spec.loss, mix_seed(seed, 1));
  TrainSchedule sched = make_schedule(sc);
  sched.batch_size = std::min(sched.batch_size, x_train.rows);

  TrainReport report;
  if (val_m > 0) {
    const Matrix x_val = apply_scaling(select_rows(ds.features, val_rows), scaling);
    const std::vector<int> y_val = select_labels(ds.labels, val_rows);
    report = sgd_train(std::move(net), x_train, y_train, spec, sched, &x_val, &y_val);
  } else {
    report = sgd_train(std::move(net), x_train, y_train, spec, sched);
  }

  std::cout << "objective " << spec_label(spec) << ", " << report.completed_epochs << " epochs";
  if (!report.epochs.empty() && sched.telemetry) {
    const EpochRecord& last = report.epochs.back();
    std::cout << ", total " << last.objective.total << ", train acc " << last.train_accuracy;
    if (last.has_validation) std::cout << ", val acc " << last.val_accuracy;
  }
  std::cout << (report.diverged ? " [diverged]" : "") << "\n";

  if (!out_path.empty()) write_json_file(out_path, train_report_to_json(report, true, save_network));
  if (!csv_path.empty()) train_report_to_csv(report, csv_path);
  return report.diverged ? 3 : 0;
}

int run_gridsearch(const DataOpts& d, const SpecOpts& s, const ScheduleOpts& sc,
                   const std::string& c_list, const std::string& d_list,
                   const std::string& dropout_list, const std::string& width_list,
                   std::size_t folds, std::size_t repeats, std::uint64_t seed,
                   const std::string& out_path) {
  const Dataset ds = load_dataset(d);
  const ObjectiveSpec base = make_spec(s);
  GridSpec grid = default_grid();
  auto parse_doubles = [](const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(std::stod(item));
    return out;
  };
  if (!c_list.empty()) grid.c_values = parse_doubles(c_list);
  if (!d_list.empty()) grid.d_values = parse_doubles(d_list);
  if (!dropout_list.empty()) grid.dropout_values = parse_doubles(dropout_list);
  grid.hidden_widths = parse_sizes(width_list);

  const GridResult res = grid_search(ds, grid, base, folds, repeats, seed, make_schedule(sc));
  std::cout << "width,dropout,C,D,mean,stddev,failed\n";
  for (const GridEntry& e : res.table)
    std::cout << e.hidden_width << "," << e.spec.dropout_rate << "," << e.spec.weight_decay << ","
              << e.spec.lcnn_d << "," << e.cv.mean << "," << e.cv.stddev << ","
              << e.cv.failed_folds << "\n";
  std::cout << "best: " << spec_label(res.best.spec) << " width=" << res.best.hidden_width
            << " C=" << res.best.spec.weight_decay << " D=" << res.best.spec.lcnn_d
            << " dropout=" << res.best.spec.dropout_rate << " mean=" << res.best.cv.mean << "\n";
  if (!out_path.empty()) {
    nlohmann::json j;
    j["best"] = {{"objective", spec_to_json(res.best.spec)},
                 {"hidden", res.best.hidden_width},
                 {"mean", res.best.cv.mean},
                 {"stddev", res.best.cv.stddev}};
    nlohmann::json table = nlohmann::json::array();
    for (const GridEntry& e : res.table)
      table.push_back({{"objective", spec_to_json(e.spec)},
                       {"hidden", e.hidden_width},
                       {"mean", e.cv.mean},
                       {"stddev", e.cv.stddev},
                       {"failed_folds", e.cv.failed_folds}});
    j["table"] = std::move(table);
    write_json_file(out_path, j);
  }
  return 0;
}

int run_cv(const DataOpts& d, const SpecOpts& s, const ScheduleOpts& sc,
           const std::vector<std::size_t>& hidden, std::size_t folds, std::size_t repeats,
           std::uint64_t seed, const std::string& out_path) {
  const Dataset ds = load_dataset(d);
  const ObjectiveSpec spec = make_spec(s);
  const CvResult r = cross_validate(ds, spec, hidden, folds, repeats, seed, make_schedule(sc));
  std::cout << spec_label(spec) << ": mean=" << r.mean << " stddev=" << r.stddev
            << " folds=" << folds << "x" << repeats << " failed=" << r.failed_folds << "\n";
  if (!out_path.empty()) {
    nlohmann::json j;
    j["objective"] = spec_to_json(spec);
    j["mean"] = r.mean;
    j["stddev"] = r.stddev;
    j["failed_folds"] = r.failed_folds;
    j["fold_scores"] = r.fold_scores;
    write_json_file(out_path, j);
  }
  return 0;
}

int run_gradcheck(std::uint64_t seed, std::size_t trials, double step) {
  Rng shape_rng(seed);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t depth = 1 + shape_rng.below(3);
    std::vector<std::size_t> widths{2 + shape_rng.below(7)};
    for (std::size_t k = 0; k + 1 < depth; ++k) widths.push_back(2 + shape_rng.below(7));
    const std::size_t out_width = 2 + shape_rng.below(3);
    widths.push_back(out_width);
    const std::uint64_t net_seed = mix_seed(seed, trial + 1);

    const std::size_t rows = 4 + shape_rng.below(5);
    Rng data_rng(mix_seed(net_seed, 9));
    Matrix x(rows, widths.front());
    for (double& v : x.data) v = data_rng.uniform(-1.0, 1.0);
    Targets targets;
    targets.values = Matrix(rows, out_width);
    targets.labels.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < out_width; ++j)
        targets.values(i, j) = data_rng.bernoulli(0.5) ? 0.9 : -0.9;
      targets.labels[i] = static_cast<int>(data_rng.below(out_width));
    }

    const Network se_net =
        init_network(make_config(widths, ActivationKind::Tanh, ActivationKind::Tanh, net_seed));
    const Network ce_net =
        init_network(make_config(widths, ActivationKind::Tanh, ActivationKind::Softmax, net_seed));
    for (const double decay : {0.0, 0.05})
      for (const LcnnMode mode : {LcnnMode::Off, LcnnMode::LastLayer, LcnnMode::AllLayers}) {
        ObjectiveSpec spec;
        spec.weight_decay = decay;
        spec.lcnn_mode = mode;
        spec.lcnn_d = mode == LcnnMode::Off ? 0.0 : 1e-2;
        spec.loss = LossKind::SquaredError;
        worst = std::max(worst, gradient_check(se_net, spec, x, targets, step));
        spec.loss = LossKind::SoftmaxCrossEntropy;
        worst = std::max(worst, gradient_check(ce_net, spec, x, targets, step));
      }

    const Autoencoder ae = init_autoencoder(widths.front(), widths.back(), net_seed);
    Matrix u(rows, widths.front());
    for (double& v : u.data) v = data_rng.uniform01();
    worst = std::max(worst, sae_gradient_check(ae, u, 0.2, 0.05, 0.05, step));
  }
  std::cout << "max relative gradient error over " << trials << " nets: " << worst << "\n";
  return worst < 1e-5 ? 0 : 1;
}

int run_capacity(const std::string& network_path, const DataOpts& d, double t,
                 const std::string& out_path) {
  const nlohmann::json j = read_json_file(network_path);
  const Network net = network_from_json(j.contains("network") ? j.at("network") : j);
  const Dataset ds = load_dataset(d);
  const ScalingParams scaling = fit_scaling(ds.features, iota_indices(ds.size()));
  const Matrix x = apply_scaling(ds.features, scaling);
  if (x.cols != net.input_width()) throw config_error("dataset width does not match the network");
  const CapacityReport report = vc_bound(net, forward(net, x), t);
  const nlohmann::json out = capacity_report_to_json(report);
  std::cout << out.dump(2) << "\n";
  if (!out_path.empty()) write_json_file(out_path, out);
  return 0;
}

int run_sae(const DataOpts& d, std::size_t hidden, double c, double lc_d, double rho,
            const ScheduleOpts& sc, std::uint64_t seed, const std::string& out_path,
            const std::string& filters_dir, const std::string& histogram_path,
            std::size_t image_height) {
  const Dataset ds = load_dataset(d);
  Matrix x = ds.features;
  double hi = 0.0;
  for (double v : x.data) hi = std::max(hi, std::fabs(v));
  if (hi > 1.0)
    for (double& v : x.data) v /= hi;  // raw pixel inputs land in [0,1]

  Autoencoder ae = init_autoencoder(x.cols, hidden, mix_seed(seed, 1));
  TrainSchedule sched = make_schedule(sc);
  sched.shuffle_seed = mix_seed(seed, 2);
  sched.batch_size = std::min(sched.batch_size, x.rows);
  const TrainReport report = sae_train(std::move(ae), x, c, lc_d, rho, sched);
  const Autoencoder trained = autoencoder_from_report(report);

  const double sparsity =
      sparsity_fraction({&trained.encoder_weights(), &trained.decoder_weights()}, 0.01);
  std::cout << "epochs " << report.completed_epochs << ", sparsity(|w|<0.01) " << sparsity;
  if (!report.epochs.empty() && sched.telemetry)
    std::cout << ", final objective " << report.epochs.back().objective.total;
  std::cout << (report.diverged ? " [diverged]" : "") << "\n";

  if (!out_path.empty()) {
    nlohmann::json j = train_report_to_json(report, true, false);
    j["autoencoder"] = autoencoder_to_json(trained);
    j["sparsity_fraction"] = sparsity;
    write_json_file(out_path, j);
  }
  if (!histogram_path.empty()) {
    const Histogram h =
        weight_histogram({&trained.encoder_weights(), &trained.decoder_weights()}, 80, 2.0);
    histogram_to_csv(h, histogram_path);
  }
  if (!filters_dir.empty()) {
    const std::size_t height = image_height > 0 ? image_height : 28;
    if (x.cols % height != 0) throw config_error("--image-height does not divide input width");
    export_filters(trained.encoder_weights(), height, x.cols / height, filters_dir);
  }
  return report.diverged ? 3 : 0;
}

int run_stats(const std::string& scores_path, const std::string& out_path) {
  std::ifstream in(scores_path);
  if (!in) throw config_error("cannot open " + scores_path);
  std::vector<std::string> methods;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  bool named_rows = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      first = false;
      // a non-numeric leading cell names the dataset column
      try {
        std::stod(cells.at(0));
        methods = cells;
        for (std::size_t i = 0; i < cells.size(); ++i) methods[i] = "m" + std::to_string(i);
        rows.push_back({});
        for (const std::string& c : cells) rows.back().push_back(std::stod(c));
      } catch (const std::invalid_argument&) {
        named_rows = true;
        methods.assign(cells.begin() + 1, cells.end());
      }
      continue;
    }
    std::vector<double> vals;
    std::size_t start = 0;
    if (named_rows) {
      names.push_back(cells.at(0));
      start = 1;
    }
    for (std::size_t i = start; i < cells.size(); ++i) vals.push_back(std::stod(cells[i]));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw data_error("no score rows in " + scores_path);
  const std::size_t k = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != k) throw data_error("ragged score table");
  Matrix scores(rows.size(), k);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < k; ++j) scores(i, j) = rows[i][j];

  nlohmann::json out;
  const FriedmanResult fr = friedman_test(scores);
  out["friedman"] = {{"chi_squared", fr.chi_squared},
                     {"p_value", fr.p_value},
                     {"p_label", format_p_value(fr.p_value)},
                     {"datasets", fr.datasets},
                     {"methods", fr.methods}};
  std::cout << "friedman chi2=" << fr.chi_squared << " p=" << format_p_value(fr.p_value) << "\n";
  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      std::vector<double> col_a(rows.size()), col_b(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        col_a[i] = scores(i, a);
        col_b[i] = scores(i, b);
      }
      nlohmann::json entry = {{"a", methods[a]}, {"b", methods[b]}};
      try {
        const WilcoxonResult w = wilcoxon_signed_rank(col_a, col_b);
        entry["statistic"] = w.statistic;
        entry["p_value"] = w.p_value;
        entry["p_label"] = format_p_value(w.p_value);
        entry["exact"] = w.exact;
        std::cout << "wilcoxon " << methods[a] << " vs " << methods[b] << ": W=" << w.statistic
                  << " p=" << format_p_value(w.p_value) << (w.exact ? " (exact)" : "") << "\n";
      } catch (const stat_error& e) {
        entry["notice"] = e.what();
        std::cout << "wilcoxon " << methods[a] << " vs " << methods[b] << ": skipped, " << e.what()
                  << "\n";
      }
      pairs.push_back(std::move(entry));
    }
  out["wilcoxon"] = std::move(pairs);
  if (!out_path.empty()) write_json_file(out_path, out);
  return 0;
}

int run_probe(const DataOpts& d, const SpecOpts& s, const ScheduleOpts& sc,
              const std::vector<std::size_t>& hidden, const std::string& sizes_list,
              std::uint64_t seed, const std::string& out_path) {
  const Dataset ds = load_dataset(d);
  const std::vector<ProbeRow> rows =
      scalability_probe(ds, parse_sizes(sizes_list), make_spec(s), hidden, make_schedule(sc), seed);
  std::ostringstream csv;
  csv << "size,seconds,accuracy\n";
  for (const ProbeRow& r : rows) csv << r.size << "," << r.seconds << "," << r.accuracy << "\n";
  std::cout << csv.str();
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw data_error("cannot write " + out_path);
    out << csv.str();
  }
  return 0;
}

int run_report(const std::string& manifest, const std::string& out_dir) {
  const ExperimentOutcome outcome = run_experiment(manifest, out_dir);
  std::cout << "bundle written to " << outcome.out_dir << "\n";
  if (outcome.results.contains("friedman") && outcome.results.at("friedman").contains("p_value"))
    std::cout << "friedman p=" << format_p_value(outcome.results.at("friedman").at("p_value").get<double>())
              << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low complexity neural networks: training, capacity bounds, experiments"};
  app.require_subcommand(1);

  DataOpts data;
  SpecOpts spec;
  ScheduleOpts sched;
  std::vector<std::size_t> hidden{8};
  std::string out_path, csv_path, sizes, network_path, manifest_path, scores_path, filters_dir,
      histogram_path, grid_c, grid_d, grid_dropout, grid_widths = "8";
  double val_fraction = 0.2;
  std::size_t folds = 5, repeats = 1, trials = 20, sae_hidden = 196, image_height = 28;
  double sae_c = 0.1, sae_d = 1e-3, sae_rho = 0.05, target_t = 0.9, step = 1e-5;
  std::uint64_t seed = 1;
  bool save_network = false;

  CLI::App* train = app.add_subcommand("train", "train one classifier and write its report");
  add_data_opts(train, data);
  add_spec_opts(train, spec);
  add_schedule_opts(train, sched);
  train->add_option("--hidden", hidden, "hidden layer widths");
  train->add_option("--val-fraction", val_fraction, "held-out fraction for validation");
  train->add_option("--seed", seed, "master seed (init + split)");
  train->add_option("--out", out_path, "report JSON path");
  train->add_option("--epochs-csv", csv_path, "per-epoch CSV path");
  train->add_flag("--save-network", save_network, "embed the trained network in the report");

  CLI::App* grid = app.add_subcommand("gridsearch", "cross-validated grid over C/D/width/dropout");
  add_data_opts(grid, data);
  add_spec_opts(grid, spec);
  add_schedule_opts(grid, sched);
  grid->add_option("--grid-c", grid_c, "comma list of C values (searched when --C > 0)");
  grid->add_option("--grid-d", grid_d, "comma list of D values (searched when --lc-mode is on)");
  grid->add_option("--grid-dropout", grid_dropout, "comma list of dropout rates");
  grid->add_option("--grid-widths", grid_widths, "comma list of hidden widths");
  grid->add_option("--folds", folds, "CV folds");
  grid->add_option("--repeats", repeats, "CV repeats");
  grid->add_option("--seed", seed, "CV seed");
  grid->add_option("--out", out_path, "grid table JSON path");

  CLI::App* cv = app.add_subcommand("cv", "repeated stratified-free k-fold cross-validation");
  add_data_opts(cv, data);
  add_spec_opts(cv, spec);
  add_schedule_opts(cv, sched);
  cv->add_option("--hidden", hidden, "hidden layer widths");
  cv->add_option("--folds", folds, "CV folds");
  cv->add_option("--repeats", repeats, "CV repeats");
  cv->add_option("--seed", seed, "CV seed");
  cv->add_option("--out", out_path, "result JSON path");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--seed", seed, "shape seed");
  gradcheck->add_option("--trials", trials, "number of random nets");
  gradcheck->add_option("--step", step, "finite-difference step");

  CLI::App* capacity = app.add_subcommand("capacity", "VC-style capacity bound for a trained net");
  capacity->add_option("--network", network_path, "report or network JSON (train --save-network)")
      ->required();
  add_data_opts(capacity, data);
  capacity->add_option("--t", target_t, "target magnitude used to recover theta");
  capacity->add_option("--out", out_path, "capacity JSON path");

  CLI::App* sae = app.add_subcommand("sae", "train a sparse autoencoder");
  add_data_opts(sae, data);
  add_schedule_opts(sae, sched);
  sae->add_option("--hidden", sae_hidden, "hidden unit count");
  sae->add_option("--kl-c", sae_c, "KL sparsity coefficient");
  sae->add_option("--lc-d,--D", sae_d, "decoder pre-activation penalty coefficient");
  sae->add_option("--rho", sae_rho, "target mean activation");
  sae->add_option("--seed", seed, "init seed");
  sae->add_option("--out", out_path, "report JSON path");
  sae->add_option("--filters-dir", filters_dir, "write encoder filters as PGM images here");
  sae->add_option("--histogram", histogram_path, "write a weight histogram CSV here");
  sae->add_option("--image-height", image_height, "image height for filter export");

  CLI::App* stats = app.add_subcommand("stats", "Friedman + pairwise Wilcoxon over a score table");
  stats->add_option("--scores", scores_path, "CSV: header of method names, one row per dataset")
      ->required();
  stats->add_option("--out", out_path, "stats JSON path");

  CLI::App* probe = app.add_subcommand("probe", "training time and accuracy vs training size");
  add_data_opts(probe, data);
  add_spec_opts(probe, spec);
  add_schedule_opts(probe, sched);
  probe->add_option("--hidden", hidden, "hidden layer widths");
  probe->add_option("--sizes", sizes, "comma list of training sizes")->required();
  probe->add_option("--seed", seed, "probe seed");
  probe->add_option("--out", out_path, "CSV path");

  CLI::App* report = app.add_subcommand("report", "run a manifest end to end");
  report->add_option("--manifest", manifest_path, "experiment manifest JSON")->required();
  report->add_option("--out", out_path, "output directory override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed())
      return run_train(data, spec, sched, hidden, val_fraction, seed, out_path, csv_path,
                       save_network);
    if (grid->parsed())
      return run_gridsearch(data, spec, sched, grid_c, grid_d, grid_dropout, grid_widths, folds,
                            repeats, seed, out_path);
    if (cv->parsed()) return run_cv(data, spec, sched, hidden, folds, repeats, seed, out_path);
    if (gradcheck->parsed()) return run_gradcheck(seed, trials, step);
    if (capacity->parsed()) return run_capacity(network_path, data, target_t, out_path);
    if (sae->parsed())
      return run_sae(data, sae_hidden, sae_c, sae_d, sae_rho, sched, seed, out_path, filters_dir,
                     histogram_path, image_height);
    if (stats->parsed()) return run_stats(scores_path, out_path);
    if (probe->parsed()) return run_probe(data, spec, sched, hidden, sizes, seed, out_path);
    if (report->parsed()) return run_report(manifest_path, out_path);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const spec_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const divergence_error& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 3;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
