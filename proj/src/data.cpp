#include "lcnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "lcnn/error.hpp"
#include "lcnn/rng.hpp"

namespace lcnn {

bool Dataset::has_missing() const {
  for (std::uint8_t v : missing_mask)
    if (v) return true;
  return false;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, delimiter)) cells.push_back(cell);
  if (!line.empty() && line.back() == delimiter) cells.emplace_back();
  return cells;
}

std::string trimmed(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return s.substr(a, b - a);
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw data_error("row " + std::to_string(row) + " column " + std::to_string(col) +
                     ": cannot parse \"" + cell + "\"");
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot read " + path);

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trimmed(line).empty()) continue;
    rows.push_back(split_line(line, schema.delimiter));
  }
  if (rows.empty()) throw data_error(path + ": no rows");

  std::vector<std::string> header;
  if (schema.has_header) {
    header = rows.front();
    for (std::string& h : header) h = trimmed(h);
    rows.erase(rows.begin());
    if (rows.empty()) throw data_error(path + ": header but no data rows");
  }
  const std::size_t width = rows.front().size();
  if (width < 2) throw data_error(path + ": need at least one feature and a label column");

  std::size_t label_col;
  if (!schema.label_column.empty()) {
    if (!schema.has_header) throw config_error("label column by name needs a header");
    const auto it = std::find(header.begin(), header.end(), schema.label_column);
    if (it == header.end()) throw config_error("label column \"" + schema.label_column + "\" not found");
    label_col = static_cast<std::size_t>(it - header.begin());
  } else if (schema.label_index >= 0) {
    label_col = static_cast<std::size_t>(schema.label_index);
    if (label_col >= width) throw config_error("label column index out of range");
  } else {
    label_col = width - 1;
  }

  Dataset ds;
  const std::size_t n_features = width - 1;
  ds.features = Matrix(rows.size(), n_features);
  ds.missing_mask.assign(rows.size() * n_features, 0);
  for (std::size_t j = 0; j < width; ++j) {
    if (j == label_col) continue;
    ds.feature_names.push_back(schema.has_header && j < header.size() ? header[j]
                                                                      : "f" + std::to_string(j));
  }

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& cells = rows[i];
    const std::size_t file_row = i + 1 + (schema.has_header ? 1 : 0);
    if (cells.size() != width)
      throw data_error("row " + std::to_string(file_row) + ": expected " + std::to_string(width) +
                       " cells, found " + std::to_string(cells.size()));
    std::size_t f = 0;
    for (std::size_t j = 0; j < width; ++j) {
      const std::string cell = trimmed(cells[j]);
      if (j == label_col) {
        const auto it = std::find(ds.class_names.begin(), ds.class_names.end(), cell);
        if (it == ds.class_names.end()) {
          ds.labels.push_back(static_cast<int>(ds.class_names.size()));
          ds.class_names.push_back(cell);
        } else {
          ds.labels.push_back(static_cast<int>(it - ds.class_names.begin()));
        }
        continue;
      }
      if (cell == schema.missing_token) {
        ds.features(i, f) = std::numeric_limits<double>::quiet_NaN();
        ds.missing_mask[i * n_features + f] = 1;
      } else {
        ds.features(i, f) = parse_cell(cell, file_row, j + 1);
      }
      ++f;
    }
  }
  ds.k_classes = ds.class_names.size();
  return ds;
}

Dataset knn_impute(const Dataset& ds, std::size_t k) {
  if (k < 1) throw config_error("knn_impute needs k >= 1");
  if (!ds.has_missing()) return ds;
  const std::size_t m = ds.size(), n = ds.feature_count();
  auto observed = [&](std::size_t i, std::size_t j) { return ds.missing_mask[i * n + j] == 0; };

  for (std::size_t j = 0; j < n; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < m && !any; ++i) any = observed(i, j);
    if (!any) throw data_error("feature " + std::to_string(j) + " missing in every row");
  }
  for (std::size_t i = 0; i < m; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n && !any; ++j) any = observed(i, j);
    if (!any) throw data_error("row " + std::to_string(i) + " has no observed features");
  }

  Dataset out = ds;
  for (std::size_t i = 0; i < m; ++i) {
    bool needs = false;
    for (std::size_t j = 0; j < n && !needs; ++j) needs = !observed(i, j);
    if (!needs) continue;

    // Squared distance over mutually observed features, count-normalized.
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(m - 1);
    for (std::size_t s = 0; s < m; ++s) {
      if (s == i) continue;
      double acc = 0.0;
      std::size_t shared = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (observed(i, j) && observed(s, j)) {
          const double diff = ds.features(i, j) - ds.features(s, j);
          acc += diff * diff;
          ++shared;
        }
      }
      if (shared > 0) dist.emplace_back(acc / static_cast<double>(shared), s);
    }
    std::sort(dist.begin(), dist.end());

    for (std::size_t j = 0; j < n; ++j) {
      if (observed(i, j)) continue;
      double acc = 0.0;
      std::size_t used = 0;
      for (const auto& [d, s] : dist) {
        if (!observed(s, j)) continue;
        acc += ds.features(s, j);
        if (++used == k) break;
      }
      if (used == 0) throw data_error("no donor rows for feature " + std::to_string(j));
      out.features(i, j) = acc / static_cast<double>(used);
      out.missing_mask[i * n + j] = 0;
    }
  }
  return out;
}

ScalingParams fit_scaling(const Matrix& features, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw config_error("fit_scaling needs at least one row");
  ScalingParams p;
  p.min.assign(features.cols, std::numeric_limits<double>::infinity());
  p.max.assign(features.cols, -std::numeric_limits<double>::infinity());
  for (std::size_t r : rows) {
    if (r >= features.rows) throw shape_error("fit_scaling: row index out of range");
    for (std::size_t j = 0; j < features.cols; ++j) {
      p.min[j] = std::min(p.min[j], features(r, j));
      p.max[j] = std::max(p.max[j], features(r, j));
    }
  }
  return p;
}

Matrix apply_scaling(const Matrix& features, const ScalingParams& params) {
  if (!params.fitted()) throw config_error("scaling parameters not fitted");
  if (params.min.size() != features.cols) throw shape_error("scaling width mismatch");
  Matrix out = features;
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) {
      const double span = params.max[j] - params.min[j];
      out(i, j) = span == 0.0 ? 0.0 : 2.0 * (out(i, j) - params.min[j]) / span - 1.0;
    }
  return out;
}

Matrix inverse_scaling(const Matrix& scaled, const ScalingParams& params) {
  if (!params.fitted()) throw config_error("scaling parameters not fitted");
  if (params.min.size() != scaled.cols) throw shape_error("scaling width mismatch");
  Matrix out = scaled;
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) {
      const double span = params.max[j] - params.min[j];
      out(i, j) = span == 0.0 ? params.min[j] : (out(i, j) + 1.0) / 2.0 * span + params.min[j];
    }
  return out;
}

Targets encode_targets(const std::vector<int>& labels, std::size_t k, LossKind loss) {
  if (k < 2) throw config_error("encode_targets needs at least two classes");
  for (int label : labels)
    if (label < 0 || static_cast<std::size_t>(label) >= k)
      throw data_error("label out of range");
  Targets t;
  t.labels = labels;
  if (loss == LossKind::SoftmaxCrossEntropy) return t;
  if (k == 2) {
    t.values = Matrix(labels.size(), 1);
    for (std::size_t i = 0; i < labels.size(); ++i) t.values(i, 0) = labels[i] == 1 ? 1.0 : -1.0;
  } else {
    t.values = Matrix(labels.size(), k, -1.0);
    for (std::size_t i = 0; i < labels.size(); ++i)
      t.values(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return t;
}

std::vector<FoldSplit> kfold_split(std::size_t m, std::size_t folds, std::size_t repeats,
                                   std::uint64_t seed) {
  if (folds < 2) throw config_error("kfold_split needs folds >= 2");
  if (m < folds) throw config_error("kfold_split needs M >= folds");
  if (repeats < 1) throw config_error("kfold_split needs repeats >= 1");
  std::vector<FoldSplit> splits;
  splits.reserve(folds * repeats);
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    std::vector<std::size_t> order = iota_indices(m);
    Rng rng(mix_seed(seed, rep));
    rng.shuffle(order);
    const std::size_t base = m / folds, extra = m % folds;
    std::size_t cursor = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      const std::size_t len = base + (f < extra ? 1 : 0);
      FoldSplit s;
      s.repeat = rep;
      s.fold = f;
      s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                          order.begin() + static_cast<std::ptrdiff_t>(cursor + len));
      s.train.reserve(m - len);
      for (std::size_t i = 0; i < m; ++i) {
        if (i < cursor || i >= cursor + len) s.train.push_back(order[i]);
      }
      std::sort(s.validation.begin(), s.validation.end());
      std::sort(s.train.begin(), s.train.end());
      splits.push_back(std::move(s));
      cursor += len;
    }
  }
  return splits;
}

double input_radius(const Matrix& features, const std::vector<std::size_t>& rows) {
  double best = 0.0;
  for (std::size_t r : rows) {
    if (r >= features.rows) throw shape_error("input_radius: row index out of range");
    best = std::max(best, row_norm(features, r));
  }
  return best;
}

Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows) throw shape_error("select_rows: row index out of range");
    const double* src = m.row_ptr(rows[i]);
    std::copy(src, src + m.cols, out.row_ptr(i));
  }
  return out;
}

std::vector<int> select_labels(const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= labels.size()) throw shape_error("select_labels: row index out of range");
    out.push_back(labels[r]);
  }
  return out;
}

namespace {

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw data_error(path + ": truncated header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace

Matrix load_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot read " + path);
  if (read_u32_be(in, path) != 0x00000803u) throw data_error(path + ": not an idx3 image file");
  const std::size_t count = read_u32_be(in, path);
  const std::size_t rows = read_u32_be(in, path);
  const std::size_t cols = read_u32_be(in, path);
  const std::size_t pixels = rows * cols;
  std::vector<unsigned char> buf(count * pixels);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw data_error(path + ": truncated image data");
  Matrix out(count, pixels);
  for (std::size_t i = 0; i < buf.size(); ++i) out.data[i] = static_cast<double>(buf[i]);
  return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot read " + path);
  if (read_u32_be(in, path) != 0x00000801u) throw data_error(path + ": not an idx1 label file");
  const std::size_t count = read_u32_be(in, path);
  std::vector<unsigned char> buf(count);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw data_error(path + ": truncated label data");
  return std::vector<int>(buf.begin(), buf.end());
}

Dataset synthetic_blobs(std::size_t samples, std::size_t features, std::size_t classes,
                        double spread, std::uint64_t seed) {
  if (samples < classes || features == 0 || classes < 2)
    throw config_error("blobs need samples >= classes >= 2 and features >= 1");
  Dataset ds;
  ds.features = Matrix(samples, features);
  ds.missing_mask.assign(samples * features, 0);
  ds.k_classes = classes;
  Rng rng(mix_seed(seed, 0xb10b5));
  std::vector<std::vector<double>> centers(classes, std::vector<double>(features, 0.0));
  for (std::size_t c = 0; c < classes; ++c)
    centers[c][c % features] = 4.0 * (1.0 + static_cast<double>(c / features));
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t c = i % classes;
    ds.labels.push_back(static_cast<int>(c));
    for (std::size_t j = 0; j < features; ++j)
      ds.features(i, j) = centers[c][j] + spread * rng.normal();
  }
  for (std::size_t j = 0; j < features; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  for (std::size_t c = 0; c < classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
  return ds;
}

Dataset synthetic_rings(std::size_t samples, std::uint64_t seed) {
  if (samples < 4) throw config_error("rings need at least 4 samples");
  Dataset ds;
  ds.features = Matrix(samples, 2);
  ds.missing_mask.assign(samples * 2, 0);
  ds.k_classes = 2;
  Rng rng(mix_seed(seed, 0x12765));
  for (std::size_t i = 0; i < samples; ++i) {
    const int label = static_cast<int>(i % 2);
    ds.labels.push_back(label);
    const double angle = rng.uniform(0.0, 6.283185307179586);
    const double radius = (label == 0 ? 1.0 : 2.5) + 0.2 * rng.normal();
    ds.features(i, 0) = radius * std::cos(angle);
    ds.features(i, 1) = radius * std::sin(angle);
  }
  ds.feature_names = {"x", "y"};
  ds.class_names = {"inner", "outer"};
  return ds;
}

nlohmann::json dataset_to_json(const Dataset& ds) {
  nlohmann::json j;
  j["format"] = "lcnn-dataset";
  j["version"] = 1;
  j["rows"] = ds.features.rows;
  j["cols"] = ds.features.cols;
  j["features"] = ds.features.data;
  j["labels"] = ds.labels;
  j["k_classes"] = ds.k_classes;
  j["feature_names"] = ds.feature_names;
  j["class_names"] = ds.class_names;
  j["missing_mask"] = ds.missing_mask;
  if (ds.scaling.fitted()) j["scaling"] = {{"min", ds.scaling.min}, {"max", ds.scaling.max}};
  return j;
}

Dataset dataset_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "lcnn-dataset")
    throw config_error("not a dataset document");
  if (j.value("version", 0) != 1) throw config_error("unsupported dataset document version");
  Dataset ds;
  ds.features = Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  ds.features.data = j.at("features").get<std::vector<double>>();
  if (ds.features.data.size() != ds.features.rows * ds.features.cols)
    throw config_error("feature block size mismatch in dataset document");
  ds.labels = j.at("labels").get<std::vector<int>>();
  ds.k_classes = j.at("k_classes").get<std::size_t>();
  ds.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  ds.class_names = j.at("class_names").get<std::vector<std::string>>();
  ds.missing_mask = j.at("missing_mask").get<std::vector<std::uint8_t>>();
  if (j.contains("scaling")) {
    ds.scaling.min = j.at("scaling").at("min").get<std::vector<double>>();
    ds.scaling.max = j.at("scaling").at("max").get<std::vector<double>>();
  }
  return ds;
}

}  // namespace lcnn
