#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "lcnn/data.hpp"
#include "lcnn/error.hpp"
#include "lcnn/rng.hpp"

using namespace lcnn;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("lcnn_test_" + name) {
    std::ofstream out(path, std::ios::binary);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("csv loading with header, missing values and dense labels") {
  const TempFile f("basic.csv",
                   "a,b,class\n"
                   "1.0,2.0,yes\n"
                   "3.0,?,no\n"
                   "5.0,6.0,yes\n");
  CsvSchema schema;
  schema.label_column = "class";
  const Dataset ds = load_csv(f.path, schema);
  REQUIRE(ds.size() == 3);
  REQUIRE(ds.feature_count() == 2);
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.class_names == std::vector<std::string>{"yes", "no"});
  CHECK(ds.k_classes == 2);
  CHECK(ds.labels == std::vector<int>{0, 1, 0});
  CHECK(ds.features(0, 1) == 2.0);
  CHECK(std::isnan(ds.features(1, 1)));
  CHECK(ds.has_missing());
  CHECK(ds.missing_mask[1 * 2 + 1] == 1);
  CHECK(ds.missing_mask[0] == 0);
}

TEST_CASE("csv label column by index and negative default") {
  const TempFile f("idx.csv",
                   "x,y,z\n"
                   "1,2,3\n"
                   "4,5,6\n");
  CsvSchema last;
  const Dataset a = load_csv(f.path, last);  // label_index -1 -> last column
  CHECK(a.feature_count() == 2);
  CHECK(a.class_names == std::vector<std::string>{"3", "6"});
  CsvSchema first;
  first.label_index = 0;
  const Dataset b = load_csv(f.path, first);
  CHECK(b.feature_count() == 2);
  CHECK(b.features(0, 0) == 2.0);
  CHECK(b.class_names == std::vector<std::string>{"1", "4"});
}

TEST_CASE("csv parse errors carry position info") {
  const TempFile f("bad.csv", "a,b\n1.0,oops\n");
  CsvSchema schema;
  schema.label_index = 0;
  try {
    load_csv(f.path, schema);
    FAIL("expected data_error");
  } catch (const data_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);  // file rows, header included
  }
  const TempFile g("ragged.csv", "a,b,c\n1,2,3\n1,2\n");
  CsvSchema any;
  CHECK_THROWS_AS(load_csv(g.path, any), data_error);
  CHECK_THROWS_AS(load_csv("does_not_exist.csv", any), data_error);
}

TEST_CASE("knn imputation averages the nearest observed donors") {
  // row 2 is missing feature 1; neighbors by feature 0 distance: rows 1,0,3
  Dataset ds;
  ds.features = Matrix::from_rows({{0.0, 10.0}, {1.0, 20.0}, {1.5, 0.0}, {4.0, 40.0}});
  ds.features(2, 1) = std::numeric_limits<double>::quiet_NaN();
  ds.labels = {0, 1, 0, 1};
  ds.k_classes = 2;
  ds.missing_mask.assign(8, 0);
  ds.missing_mask[2 * 2 + 1] = 1;
  const Dataset imp = knn_impute(ds, 2);
  CHECK(imp.features(2, 1) == doctest::Approx((20.0 + 10.0) / 2.0));  // rows 1 and 0
  CHECK(!imp.has_missing());
  CHECK(imp.features(0, 0) == 0.0);  // observed cells untouched
  // idempotent: imputing again changes nothing
  const Dataset again = knn_impute(imp, 2);
  CHECK(again.features == imp.features);
}

TEST_CASE("knn imputation distance normalizes by shared coordinate count") {
  // rows: target has features {0:0.0, 1:?, 2:0.0}
  // donor A shares only feature 0 (distance 1^2/1 = 1)
  // donor B shares features 0 and 2 (distance (2^2+0)/2 = 2)
  // with k=1 donor A wins despite B's smaller per-coordinate gap on feature 2
  Dataset ds;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ds.features = Matrix::from_rows({{0.0, nan, 0.0}, {1.0, 5.0, nan}, {2.0, 9.0, 0.0}});
  ds.labels = {0, 1, 1};
  ds.k_classes = 2;
  ds.missing_mask.assign(9, 0);
  ds.missing_mask[0 * 3 + 1] = 1;
  ds.missing_mask[1 * 3 + 2] = 1;
  const Dataset imp = knn_impute(ds, 1);
  CHECK(imp.features(0, 1) == 5.0);
}

TEST_CASE("knn imputation rejects unimputable data") {
  Dataset ds;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ds.features = Matrix::from_rows({{nan, 1.0}, {nan, 2.0}});
  ds.labels = {0, 1};
  ds.k_classes = 2;
  ds.missing_mask = {1, 0, 1, 0};
  CHECK_THROWS_AS(knn_impute(ds, 1), data_error);  // feature 0 never observed
}

TEST_CASE("scaling maps the fitted range onto [-1, 1]") {
  const Matrix x = Matrix::from_rows({{0.0, 5.0}, {10.0, 5.0}, {5.0, 5.0}});
  const ScalingParams p = fit_scaling(x, iota_indices(3));
  const Matrix s = apply_scaling(x, p);
  CHECK(s(0, 0) == doctest::Approx(-1.0));
  CHECK(s(1, 0) == doctest::Approx(1.0));
  CHECK(s(2, 0) == doctest::Approx(0.0));
  CHECK(s(0, 1) == 0.0);  // constant feature -> 0
  const Matrix back = inverse_scaling(s, p);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(x.data[i]).epsilon(1e-12));
}

TEST_CASE("scaling fitted on a subset extrapolates beyond [-1, 1]") {
  const Matrix x = Matrix::from_rows({{0.0}, {1.0}, {4.0}});
  const ScalingParams p = fit_scaling(x, {0, 1});  // fit on first two rows only
  const Matrix s = apply_scaling(x, p);
  CHECK(s(0, 0) == doctest::Approx(-1.0));
  CHECK(s(1, 0) == doctest::Approx(1.0));
  CHECK(s(2, 0) == doctest::Approx(7.0));
}

TEST_CASE("target encoding per loss and class count") {
  const Targets binary = encode_targets({0, 1, 1}, 2, LossKind::SquaredError);
  REQUIRE(binary.values.rows == 3);
  REQUIRE(binary.values.cols == 1);
  CHECK(binary.values(0, 0) == -1.0);
  CHECK(binary.values(1, 0) == 1.0);  // class index 1 is the positive class
  CHECK(binary.labels == std::vector<int>{0, 1, 1});

  const Targets multi = encode_targets({2, 0}, 3, LossKind::SquaredError);
  REQUIRE(multi.values.cols == 3);
  CHECK(multi.values(0, 0) == -1.0);
  CHECK(multi.values(0, 2) == 1.0);
  CHECK(multi.values(1, 0) == 1.0);

  const Targets soft = encode_targets({1, 0, 2}, 3, LossKind::SoftmaxCrossEntropy);
  CHECK(soft.values.rows == 0);  // softmax carries labels only
  CHECK(soft.labels == std::vector<int>{1, 0, 2});

  CHECK_THROWS_AS(encode_targets({0, 3}, 3, LossKind::SquaredError), data_error);
}

TEST_CASE("kfold covers every index once per repeat with near-equal folds") {
  const auto splits = kfold_split(23, 5, 3, 42);
  REQUIRE(splits.size() == 15);
  for (std::size_t rep = 0; rep < 3; ++rep) {
    std::set<std::size_t> seen;
    for (std::size_t f = 0; f < 5; ++f) {
      const FoldSplit& s = splits[rep * 5 + f];
      CHECK(s.repeat == rep);
      CHECK(s.fold == f);
      CHECK((s.validation.size() == 4 || s.validation.size() == 5));
      CHECK(s.train.size() + s.validation.size() == 23);
      CHECK(std::is_sorted(s.train.begin(), s.train.end()));
      CHECK(std::is_sorted(s.validation.begin(), s.validation.end()));
      for (std::size_t idx : s.validation) {
        CHECK(seen.insert(idx).second);  // appears in exactly one fold
        CHECK(std::find(s.train.begin(), s.train.end(), idx) == s.train.end());
      }
    }
    CHECK(seen.size() == 23);
  }
  // deterministic per seed, different across repeats
  const auto again = kfold_split(23, 5, 3, 42);
  CHECK(again[0].validation == splits[0].validation);
  CHECK(splits[0].validation != splits[5].validation);
  CHECK_THROWS_AS(kfold_split(4, 5, 1, 1), config_error);
}

TEST_CASE("row selection and radius helpers") {
  const Matrix x = Matrix::from_rows({{3.0, 4.0}, {1.0, 0.0}, {0.0, 2.0}});
  const Matrix sel = select_rows(x, {2, 0});
  CHECK(sel == Matrix::from_rows({{0.0, 2.0}, {3.0, 4.0}}));
  CHECK(select_labels({7, 8, 9}, {2, 0}) == std::vector<int>{9, 7});
  CHECK(input_radius(x, iota_indices(3)) == doctest::Approx(5.0));
  CHECK(input_radius(x, {1, 2}) == doctest::Approx(2.0));
}

TEST_CASE("idx round trip") {
  // 2 images of 2x2 pixels plus matching labels
  const std::string imgs{
      '\x00', '\x00', '\x08', '\x03',              // magic 2051
      '\x00', '\x00', '\x00', '\x02',              // count
      '\x00', '\x00', '\x00', '\x02',              // rows
      '\x00', '\x00', '\x00', '\x02',              // cols
      '\x00', '\x7f', '\xff', '\x01',              // image 0
      '\x10', '\x20', '\x30', '\x40'};             // image 1
  const std::string labs{'\x00', '\x00', '\x08', '\x01', '\x00', '\x00', '\x00', '\x02',
                         '\x07', '\x02'};
  const TempFile fi("imgs.idx", imgs);
  const TempFile fl("labs.idx", labs);
  const Matrix m = load_idx_images(fi.path);
  REQUIRE(m.rows == 2);
  REQUIRE(m.cols == 4);
  CHECK(m(0, 0) == 0.0);
  CHECK(m(0, 1) == 127.0);
  CHECK(m(0, 2) == 255.0);
  CHECK(m(1, 3) == 64.0);
  CHECK(load_idx_labels(fl.path) == std::vector<int>{7, 2});

  const TempFile bad("badmagic.idx", std::string{'\x00', '\x00', '\x07', '\x03'});
  CHECK_THROWS_AS(load_idx_images(bad.path), data_error);
  const TempFile trunc("trunc.idx", imgs.substr(0, 18));
  CHECK_THROWS_AS(load_idx_images(trunc.path), data_error);
}

TEST_CASE("synthetic generators") {
  const Dataset blobs = synthetic_blobs(90, 4, 3, 0.2, 8);
  CHECK(blobs.size() == 90);
  CHECK(blobs.feature_count() == 4);
  CHECK(blobs.k_classes == 3);
  std::set<int> classes(blobs.labels.begin(), blobs.labels.end());
  CHECK(classes.size() == 3);
  CHECK(!blobs.has_missing());

  const Dataset rings = synthetic_rings(100, 4);
  CHECK(rings.feature_count() == 2);
  CHECK(rings.k_classes == 2);
  for (std::size_t i = 0; i < rings.size(); ++i) {
    const double r = std::hypot(rings.features(i, 0), rings.features(i, 1));
    if (rings.labels[i] == 0)
      CHECK(r < 1.8);
    else
      CHECK(r > 1.7);
  }
  // deterministic per seed
  const Dataset rings2 = synthetic_rings(100, 4);
  CHECK(rings2.features == rings.features);
}

TEST_CASE("dataset json round trip") {
  const TempFile f("roundtrip.csv",
                   "a,b,class\n"
                   "1.0,2.0,x\n"
                   "3.0,?,y\n");
  CsvSchema schema;
  schema.label_column = "class";
  const Dataset ds = load_csv(f.path, schema);
  const Dataset back = dataset_from_json(dataset_to_json(ds));
  CHECK(back.size() == ds.size());
  CHECK(back.labels == ds.labels);
  CHECK(back.k_classes == ds.k_classes);
  CHECK(back.class_names == ds.class_names);
  CHECK(back.missing_mask == ds.missing_mask);
  CHECK(back.features(0, 0) == ds.features(0, 0));
  CHECK(std::isnan(back.features(1, 1)));
}
