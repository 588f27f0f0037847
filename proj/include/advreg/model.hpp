#pragma once

// Core types of the adversarial regression model: data blocks, the linear
// predictor, both players' losses and objectives, and the similarity
// constraints that bound how far the adversary may move its data.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace advreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Weights = Eigen::VectorXd;

/// Raised when a caller breaks a documented precondition (shape mismatch,
/// empty input, out-of-range parameter).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a value lies outside the domain of a function, e.g. the
/// cosine similarity of a zero-norm row.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what, std::optional<std::size_t> row = std::nullopt)
      : std::domain_error(what), row_(row) {}
  std::optional<std::size_t> row() const { return row_; }

 private:
  std::optional<std::size_t> row_;
};

/// Raised when a numerical routine cannot produce an answer, e.g. a
/// singular linear system.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rows of features with one label per row.
struct Dataset {
  RowMatrix rows;
  Vector labels;

  std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t features() const { return static_cast<std::size_t>(rows.cols()); }

  /// Throws ContractError unless rows >= 1, features >= 1 and the label
  /// count equals the row count.
  void validate() const;
  /// True when every feature value and label lies in [0, 1].
  bool normalized() const;
};

/// The adversary-controlled part of the training data.
///
/// `current` is the data the learner sees, `origin` the untouched start
/// point. `target_labels` are the predictions the adversary wants.
struct AdversaryBlock {
  RowMatrix current;
  RowMatrix origin;
  Vector true_labels;
  Vector target_labels;

  /// Starts the block at its origin with targets = labels + nu.
  static AdversaryBlock from_origin(RowMatrix origin, Vector labels, double nu);

  std::size_t size() const { return static_cast<std::size_t>(origin.rows()); }
  std::size_t features() const { return static_cast<std::size_t>(origin.cols()); }

  /// Copy of this block with `current` replaced.
  AdversaryBlock with_current(RowMatrix data) const;

  /// Throws ContractError on shape mismatch, DomainError on a zero-norm
  /// origin row.
  void validate() const;
};

struct ModelConfig {
  /// Minimum cosine similarity between a manipulated row and its origin.
  double delta = 0.95;
  /// Ridge weight rho; the objective carries (1/rho)|w|^2. Disabled when empty.
  std::optional<double> ridge = 100.0;
  /// Training target offset; empty means 2 * std of the training labels.
  std::optional<double> nu;

  void validate() const;
  /// 1/rho, or 0 when the ridge term is disabled.
  double ridge_coefficient() const { return ridge ? 1.0 / *ridge : 0.0; }
};

double predict(const Weights& w, const Eigen::Ref<const Vector>& x);

double learner_loss(double prediction, double label);
double adversary_loss(double prediction, double target);

/// Mean squared error on the static rows plus mean squared error of the
/// adversary's rows against their true labels, plus the optional ridge term.
double upper_objective(const Weights& w, const AdversaryBlock& adversary, const Dataset& static_set,
                       const ModelConfig& cfg);

/// Mean squared distance between predictions on the adversary's rows and
/// its targets.
double lower_objective(const Weights& w, const AdversaryBlock& adversary);

double cosine_similarity(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// Component i is delta - cos(current_i, origin_i); feasible iff all <= 0.
Vector constraint_values(const AdversaryBlock& adversary, double delta);

/// Population standard deviation.
double standard_deviation(const Vector& values);

}  // namespace advreg
