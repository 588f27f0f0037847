#pragma once

// Data preparation for the experiments: CSV ingestion, min-max scaling,
// seeded train/test splits, the static/adversary division of the training
// rows, and the evaluation metrics.

#include "advreg/model.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace advreg {

/// Malformed or missing input data. Carries the location when known.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvSchema {
  std::string label_column;
  /// Feature columns in order; empty selects every column that is neither
  /// the label nor excluded.
  std::vector<std::string> feature_columns;
  std::vector<std::string> exclude_columns;
  /// Detected from the header when empty (';' if present, else ',').
  std::optional<char> delimiter;
};

struct LabeledData {
  Dataset data;
  std::vector<std::string> feature_names;
  std::string label_name;
};

LabeledData read_csv(std::istream& in, const CsvSchema& schema, const std::string& source = "<stream>");
LabeledData load_dataset(const std::string& path, const CsvSchema& schema);

/// Writes features then label with a header, 17 significant digits.
void write_csv(std::ostream& out, const LabeledData& data, char delimiter = ',');

/// Per-column min-max scaling to [0, 1] of features and label. Constant
/// columns map to 0.5.
struct MinMaxScaler {
  Vector feature_min;
  Vector feature_max;
  double label_min = 0.0;
  double label_max = 1.0;

  static MinMaxScaler fit(const Dataset& data);
  Dataset transform(const Dataset& data) const;
  Dataset inverse(const Dataset& data) const;
  double inverse_label(double v) const;
};

/// Fits the scaler on `data` and applies it.
std::pair<Dataset, MinMaxScaler> normalize(const Dataset& data);

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

/// Seeded shuffle, then the first round(ratio * n) rows (half rounds up)
/// become the training set.
Split split(const Dataset& data, double ratio, std::uint64_t seed);

struct TrainingSplit {
  Dataset static_set;
  AdversaryBlock adversary;
  std::vector<std::size_t> adversary_indices;
  double nu = 0.0;
};

/// m seeded-random training rows form the adversary block with targets
/// labels + nu (default 2 std of the training labels); the rest are static.
/// Zero-norm rows are never assigned to the adversary.
TrainingSplit make_training_split(const Dataset& train, std::size_t m, std::optional<double> nu,
                                  std::uint64_t seed);

double evaluate_mse(const Weights& w, const Dataset& test);

/// Component j: mean over rows of |X*_ij - X0_ij|.
Vector feature_movement(const RowMatrix& solution, const RowMatrix& origin);

/// Noisy linear data on raw, unequal feature scales with a fixed generator,
/// for tests and smoke runs when no real dataset is at hand.
LabeledData synthetic_dataset(std::size_t rows, std::size_t features, std::uint64_t seed);

/// FNV-1a 64-bit hash, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);
std::string file_checksum(const std::string& path);

}  // namespace advreg
