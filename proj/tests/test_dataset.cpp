#include "advreg/dataset.hpp"
#include "support.hpp"

#include "doctest.h"

#include <set>
#include <sstream>

using namespace advreg;
using advreg::testing::random_matrix;
using advreg::testing::random_vector;

namespace {

const std::string fixtures = FIXTURE_DIR;

std::string error_of(const std::string& file, const CsvSchema& schema) {
  try {
    load_dataset(fixtures + "/" + file, schema);
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

Dataset column(std::initializer_list<double> values) {
  Dataset d;
  d.rows.resize(static_cast<Eigen::Index>(values.size()), 1);
  d.labels.resize(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) {
    d.rows(i, 0) = v;
    d.labels[i++] = v;
  }
  return d;
}

}  // namespace

TEST_CASE("csv round trip") {
  CsvSchema schema;
  schema.label_column = "quality";
  const LabeledData d = load_dataset(fixtures + "/three_rows.csv", schema);
  REQUIRE(d.data.size() == 3);
  CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(d.label_name == "quality");
  CHECK(d.data.rows(1, 0) == -0.25);
  CHECK(d.data.rows(1, 1) == 4e-3);
  CHECK(d.data.labels[2] == 0.125);

  std::stringstream out;
  write_csv(out, d, ';');
  const LabeledData back = read_csv(out, schema);
  CHECK(back.feature_names == d.feature_names);
  CHECK(back.data.rows == d.data.rows);
  CHECK(back.data.labels == d.data.labels);
}

TEST_CASE("column selection") {
  std::istringstream in("No,x1,x2,y\n1,0.5,0.25,1\n2,0.75,0.125,2\n");
  CsvSchema schema;
  schema.label_column = "y";
  schema.exclude_columns = {"No"};
  const LabeledData d = read_csv(in, schema);
  CHECK(d.feature_names == std::vector<std::string>{"x1", "x2"});
  CHECK(d.data.rows(1, 1) == 0.125);

  std::istringstream again("No,x1,x2,y\n1,0.5,0.25,1\n");
  schema.feature_columns = {"x2"};
  CHECK(read_csv(again, schema).data.rows.cols() == 1);
}

TEST_CASE("csv errors name the location") {
  CsvSchema schema;
  schema.label_column = "y";
  const std::string bad = error_of("bad_cell.csv", schema);
  CHECK(bad.find("line 3") != std::string::npos);
  CHECK(bad.find("'b'") != std::string::npos);
  CHECK(bad.find("oops") != std::string::npos);

  CHECK(error_of("missing_label.csv", schema).find("missing column 'y'") != std::string::npos);
  CHECK(error_of("empty.csv", schema).find("empty") != std::string::npos);
  CHECK(error_of("no_such_file.csv", schema).find("no_such_file.csv") != std::string::npos);

  std::istringstream ragged("a,y\n1,2,3\n");
  CHECK_THROWS_AS(read_csv(ragged, schema), DataError);
}

TEST_CASE("min-max scaling") {
  const auto [scaled, scaler] = normalize(column({2, 4, 6}));
  CHECK(scaled.rows(0, 0) == 0.0);
  CHECK(scaled.rows(1, 0) == 0.5);
  CHECK(scaled.rows(2, 0) == 1.0);
  CHECK(scaled.labels[1] == 0.5);
  CHECK(scaler.inverse_label(1.0) == 6.0);

  const auto [flat, flat_scaler] = normalize(column({3, 3, 3}));
  CHECK(flat.rows.col(0).isConstant(0.5));
  CHECK(flat_scaler.inverse(flat).rows(0, 0) == 3.0);

  Rng rng(1);
  const Dataset d{random_matrix(rng, 30, 4, -5, 5), random_vector(rng, 30, 10, 20)};
  const auto [s, sc] = normalize(d);
  CHECK(s.rows.minCoeff() >= 0.0);
  CHECK(s.rows.maxCoeff() <= 1.0);
  const Dataset back = sc.inverse(s);
  CHECK((back.rows - d.rows).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.labels - d.labels).cwiseAbs().maxCoeff() <= 1e-12);

  // Fitted on one set, applied to another: values may leave [0, 1].
  const Dataset wider = sc.transform(Dataset{d.rows * 2.0, d.labels});
  CHECK(wider.rows.maxCoeff() > 1.0);
}

TEST_CASE("train/test split") {
  Rng rng(2);
  const Dataset d{random_matrix(rng, 414, 3, 0, 1), random_vector(rng, 414, 0, 1)};
  const Split s = split(d, 0.8, 7);
  CHECK(s.train.size() == 331);
  CHECK(s.test.size() == 83);
  std::set<std::size_t> all(s.train_indices.begin(), s.train_indices.end());
  all.insert(s.test_indices.begin(), s.test_indices.end());
  CHECK(all.size() == 414);
  CHECK(*all.rbegin() == 413);
  for (std::size_t k = 0; k < s.test_indices.size(); ++k) {
    CHECK(s.test.rows.row(static_cast<Eigen::Index>(k)) == d.rows.row(static_cast<Eigen::Index>(s.test_indices[k])));
  }

  const Split again = split(d, 0.8, 7);
  CHECK(again.train_indices == s.train_indices);
  CHECK(split(d, 0.8, 8).train_indices != s.train_indices);

  // 0.8 * 4163 = 3330.4 rounds down, 0.5 * 5 = 2.5 rounds up.
  CHECK(split(Dataset{RowMatrix::Ones(4163, 1), Vector::Zero(4163)}, 0.8, 0).train.size() == 3330);
  CHECK(split(Dataset{RowMatrix::Ones(5, 1), Vector::Zero(5)}, 0.5, 0).train.size() == 3);
  CHECK_THROWS_AS(split(d, 1.0, 0), ContractError);
  CHECK_THROWS_AS(split(Dataset{RowMatrix::Ones(1, 1), Vector::Zero(1)}, 0.5, 0), ContractError);
}

TEST_CASE("static/adversary division") {
  Rng rng(3);
  const Dataset train{random_matrix(rng, 20, 3, 0.1, 1), random_vector(rng, 20, 0, 1)};
  const TrainingSplit t = make_training_split(train, 4, std::nullopt, 11);
  CHECK(t.static_set.size() == 16);
  CHECK(t.adversary.size() == 4);
  CHECK(t.nu == doctest::Approx(2.0 * standard_deviation(train.labels)));
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(t.adversary.target_labels[i] == doctest::Approx(t.adversary.true_labels[i] + t.nu));
    CHECK(t.adversary.origin.row(i) == train.rows.row(static_cast<Eigen::Index>(t.adversary_indices[static_cast<std::size_t>(i)])));
  }
  CHECK(make_training_split(train, 4, std::nullopt, 11).adversary_indices == t.adversary_indices);

  const TrainingSplit plain = make_training_split(train, 1, 0.0, 11);
  CHECK(plain.adversary.target_labels == plain.adversary.true_labels);
  CHECK(make_training_split(train, 19, 0.1, 0).static_set.size() == 1);
  CHECK_THROWS_AS(make_training_split(train, 0, 0.1, 0), ContractError);
  CHECK_THROWS_AS(make_training_split(train, 20, 0.1, 0), ContractError);

  // Zero rows never join the adversary block.
  Dataset zeros = train;
  zeros.rows.topRows(18).setZero();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TrainingSplit z = make_training_split(zeros, 2, 0.1, seed);
    CHECK(z.adversary_indices == std::vector<std::size_t>{18, 19});
  }
  CHECK_THROWS_AS(make_training_split(zeros, 3, 0.1, 0), ContractError);
}

TEST_CASE("test mse") {
  Rng rng(4);
  const RowMatrix X = random_matrix(rng, 10, 3, 0, 1);
  const Vector w = random_vector(rng, 3, -1, 1);
  CHECK(evaluate_mse(w, Dataset{X, X * w}) <= 1e-30);
  CHECK(evaluate_mse(Vector::Zero(3), Dataset{X, Vector::Constant(10, 0.5)}) == doctest::Approx(0.25).epsilon(1e-15));

  const Vector y = random_vector(rng, 10, 0, 1);
  double s = 0.0;
  for (Eigen::Index i = 0; i < 10; ++i) {
    double p = 0.0;
    for (Eigen::Index j = 0; j < 3; ++j) p += w[j] * X(i, j);
    s += (p - y[i]) * (p - y[i]);
  }
  CHECK(evaluate_mse(w, Dataset{X, y}) == doctest::Approx(s / 10).epsilon(1e-13));
  CHECK_THROWS_AS(evaluate_mse(Vector::Zero(2), Dataset{X, y}), ContractError);
}

TEST_CASE("feature movement") {
  Rng rng(5);
  const RowMatrix X0 = random_matrix(rng, 4, 3, 0, 1);
  CHECK(feature_movement(X0, X0) == Vector::Zero(3));

  RowMatrix X = X0;
  X.col(0).array() += 0.1;
  const Vector mv = feature_movement(X, X0);
  CHECK(mv[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(mv[1] == 0.0);
  CHECK(mv[2] == 0.0);

  // Reordering rows of both matrices together leaves the statistic unchanged.
  const RowMatrix moved = random_matrix(rng, 4, 3, 0, 1);
  const Vector base = feature_movement(moved, X0);
  CHECK((base.array() >= 0.0).all());
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  const Vector permuted = feature_movement(perm * moved, perm * X0);
  CHECK((permuted - base).cwiseAbs().maxCoeff() <= 1e-15);

  CHECK_THROWS_AS(feature_movement(X0, X0.leftCols(2)), ContractError);
}

TEST_CASE("synthetic data and checksums") {
  const LabeledData a = synthetic_dataset(50, 4, 9);
  const LabeledData b = synthetic_dataset(50, 4, 9);
  CHECK(a.data.rows == b.data.rows);
  CHECK(a.data.labels == b.data.labels);
  CHECK(a.data.rows.allFinite());
  CHECK(synthetic_dataset(50, 4, 10).data.rows != a.data.rows);
  CHECK(a.feature_names.size() == 4);

  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(file_checksum(fixtures + "/three_rows.csv").size() == 16);
  CHECK_THROWS_AS(file_checksum(fixtures + "/no_such_file.csv"), DataError);
}
