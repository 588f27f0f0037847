#include "advreg/dataset.hpp"

#include "advreg/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace advreg {

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      cell += c;
    } else if (c == delim && !quoted) {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

LabeledData read_csv(std::istream& in, const CsvSchema& schema, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw DataError(source + ": empty file (no header row)");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const char delim = schema.delimiter.value_or(line.find(';') != std::string::npos ? ';' : ',');
  const std::vector<std::string> header = split_line(line, delim);

  auto column_of = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(source + ": missing column '" + name + "' in header");
    return static_cast<std::size_t>(it - header.begin());
  };

  if (schema.label_column.empty()) throw DataError(source + ": no label column configured");
  const std::size_t label_col = column_of(schema.label_column);
  for (const auto& ex : schema.exclude_columns) column_of(ex);

  std::vector<std::size_t> feature_cols;
  LabeledData out;
  out.label_name = schema.label_column;
  if (!schema.feature_columns.empty()) {
    for (const auto& name : schema.feature_columns) feature_cols.push_back(column_of(name));
  } else {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == label_col) continue;
      if (std::find(schema.exclude_columns.begin(), schema.exclude_columns.end(), header[c]) !=
          schema.exclude_columns.end()) {
        continue;
      }
      feature_cols.push_back(c);
    }
  }
  if (feature_cols.empty()) throw DataError(source + ": no feature columns selected");
  for (auto c : feature_cols) out.feature_names.push_back(header[c]);

  std::vector<double> values;
  std::vector<double> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, delim);
    if (cells.size() != header.size()) {
      throw DataError(source + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    auto number = [&](std::size_t c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw DataError(source + ": line " + std::to_string(line_no) + ", column '" + header[c] +
                        "': non-numeric value '" + cells[c] + "'");
      }
      return v;
    };
    for (auto c : feature_cols) values.push_back(number(c));
    labels.push_back(number(label_col));
  }
  if (labels.empty()) throw DataError(source + ": no data rows");

  const auto n = static_cast<Eigen::Index>(labels.size());
  const auto q = static_cast<Eigen::Index>(feature_cols.size());
  out.data.rows = Eigen::Map<const RowMatrix>(values.data(), n, q);
  out.data.labels = Eigen::Map<const Vector>(labels.data(), n);
  return out;
}

LabeledData load_dataset(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  return read_csv(in, schema, path);
}

void write_csv(std::ostream& out, const LabeledData& data, char delimiter) {
  for (const auto& name : data.feature_names) out << name << delimiter;
  out << data.label_name << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.data.rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.data.rows.cols(); ++j) out << data.data.rows(i, j) << delimiter;
    out << data.data.labels[i] << '\n';
  }
}

// ---------------------------------------------------------------------------

MinMaxScaler MinMaxScaler::fit(const Dataset& data) {
  data.validate();
  MinMaxScaler s;
  s.feature_min = data.rows.colwise().minCoeff().transpose();
  s.feature_max = data.rows.colwise().maxCoeff().transpose();
  s.label_min = data.labels.minCoeff();
  s.label_max = data.labels.maxCoeff();
  return s;
}

namespace {

double scale(double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.5; }
double unscale(double v, double lo, double hi) { return hi > lo ? lo + v * (hi - lo) : lo; }

}  // namespace

Dataset MinMaxScaler::transform(const Dataset& data) const {
  if (data.rows.cols() != feature_min.size()) throw ContractError("scaler feature count mismatch");
  Dataset out = data;
  for (Eigen::Index i = 0; i < out.rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.rows.cols(); ++j) {
      out.rows(i, j) = scale(out.rows(i, j), feature_min[j], feature_max[j]);
    }
    out.labels[i] = scale(out.labels[i], label_min, label_max);
  }
  return out;
}

Dataset MinMaxScaler::inverse(const Dataset& data) const {
  if (data.rows.cols() != feature_min.size()) throw ContractError("scaler feature count mismatch");
  Dataset out = data;
  for (Eigen::Index i = 0; i < out.rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.rows.cols(); ++j) {
      out.rows(i, j) = unscale(out.rows(i, j), feature_min[j], feature_max[j]);
    }
    out.labels[i] = unscale(out.labels[i], label_min, label_max);
  }
  return out;
}

double MinMaxScaler::inverse_label(double v) const { return unscale(v, label_min, label_max); }

std::pair<Dataset, MinMaxScaler> normalize(const Dataset& data) {
  MinMaxScaler s = MinMaxScaler::fit(data);
  return {s.transform(data), s};
}

namespace {

Dataset take_rows(const Dataset& data, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.rows.resize(static_cast<Eigen::Index>(idx.size()), data.rows.cols());
  out.labels.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto e = static_cast<Eigen::Index>(k);
    out.rows.row(e) = data.rows.row(static_cast<Eigen::Index>(idx[k]));
    out.labels[e] = data.labels[static_cast<Eigen::Index>(idx[k])];
  }
  return out;
}

}  // namespace

Split split(const Dataset& data, double ratio, std::uint64_t seed) {
  data.validate();
  if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("split ratio must lie in (0, 1)");
  const std::size_t n = data.size();
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
  if (n_train == 0 || n_train >= n) {
    throw ContractError("split of " + std::to_string(n) + " rows leaves an empty part");
  }
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  Split s;
  s.train_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  s.train = take_rows(data, s.train_indices);
  s.test = take_rows(data, s.test_indices);
  return s;
}

TrainingSplit make_training_split(const Dataset& train, std::size_t m, std::optional<double> nu,
                                  std::uint64_t seed) {
  train.validate();
  const std::size_t n = train.size();
  if (m < 1 || m >= n) {
    throw ContractError("adversary size m=" + std::to_string(m) + " must satisfy 1 <= m < " +
                        std::to_string(n));
  }
  std::vector<std::size_t> pool;
  for (Eigen::Index i = 0; i < train.rows.rows(); ++i) {
    if (train.rows.row(i).squaredNorm() > 0.0) pool.push_back(static_cast<std::size_t>(i));
  }
  if (pool.size() < m) throw ContractError("not enough nonzero rows for the adversary block");

  Rng rng(seed);
  std::vector<std::size_t> chosen = rng.sample(pool.size(), m);
  for (auto& c : chosen) c = pool[c];
  std::sort(chosen.begin(), chosen.end());

  std::vector<std::size_t> rest;
  rest.reserve(n - m);
  for (std::size_t i = 0, k = 0; i < n; ++i) {
    if (k < chosen.size() && chosen[k] == i) {
      ++k;
    } else {
      rest.push_back(i);
    }
  }

  TrainingSplit out;
  out.nu = nu.value_or(2.0 * standard_deviation(train.labels));
  if (out.nu < 0.0) throw ContractError("target offset nu must be >= 0");
  const Dataset adv = take_rows(train, chosen);
  out.static_set = take_rows(train, rest);
  out.adversary = AdversaryBlock::from_origin(adv.rows, adv.labels, out.nu);
  out.adversary_indices = std::move(chosen);
  return out;
}

double evaluate_mse(const Weights& w, const Dataset& test) {
  if (test.size() == 0) throw ContractError("evaluate_mse: empty test set");
  if (w.size() != test.rows.cols()) throw ContractError("evaluate_mse: feature count mismatch");
  return (test.rows * w - test.labels).squaredNorm() / static_cast<double>(test.size());
}

Vector feature_movement(const RowMatrix& solution, const RowMatrix& origin) {
  if (solution.rows() != origin.rows() || solution.cols() != origin.cols()) {
    throw ContractError("feature_movement: shapes differ");
  }
  if (solution.rows() == 0) throw ContractError("feature_movement: no rows");
  return (solution - origin).cwiseAbs().colwise().mean().transpose();
}

LabeledData synthetic_dataset(std::size_t rows, std::size_t features, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(rows);
  const auto q = static_cast<Eigen::Index>(features);
  Vector coef(q), offset(q), spread(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    coef[j] = rng.uniform(-1.0, 1.5);
    offset[j] = rng.uniform(0.0, 10.0);
    spread[j] = rng.uniform(0.5, 20.0);
  }
  LabeledData out;
  out.data.rows.resize(n, q);
  out.data.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double shared = rng.normal();
    double y = 0.0;
    for (Eigen::Index j = 0; j < q; ++j) {
      const double z = 0.5 * shared + rng.normal();
      out.data.rows(i, j) = offset[j] + spread[j] * z;
      y += coef[j] * z;
    }
    out.data.labels[i] = 5.0 + y + 0.5 * rng.normal();
  }
  for (Eigen::Index j = 0; j < q; ++j) out.feature_names.push_back("x" + std::to_string(j + 1));
  out.label_name = "y";
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a_hex(buf.str());
}

}  // namespace advreg
