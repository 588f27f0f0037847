#include "advreg/model.hpp"

#include <cmath>
#include <string>

namespace advreg {

void Dataset::validate() const {
  if (rows.rows() < 1 || rows.cols() < 1) {
    throw ContractError("dataset needs at least one row and one feature");
  }
  if (labels.size() != rows.rows()) {
    throw ContractError("dataset has " + std::to_string(rows.rows()) + " rows but " +
                        std::to_string(labels.size()) + " labels");
  }
}

bool Dataset::normalized() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (Eigen::Index i = 0; i < rows.size(); ++i) {
    if (!in_unit(rows.data()[i])) return false;
  }
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (!in_unit(labels[i])) return false;
  }
  return true;
}

AdversaryBlock AdversaryBlock::from_origin(RowMatrix origin, Vector labels, double nu) {
  if (nu < 0.0) throw ContractError("target offset nu must be >= 0");
  AdversaryBlock block;
  block.current = origin;
  block.origin = std::move(origin);
  block.target_labels = labels.array() + nu;
  block.true_labels = std::move(labels);
  block.validate();
  return block;
}

AdversaryBlock AdversaryBlock::with_current(RowMatrix data) const {
  AdversaryBlock copy = *this;
  copy.current = std::move(data);
  return copy;
}

void AdversaryBlock::validate() const {
  if (origin.rows() < 1 || origin.cols() < 1) {
    throw ContractError("adversary block needs at least one row and one feature");
  }
  if (current.rows() != origin.rows() || current.cols() != origin.cols()) {
    throw ContractError("adversary current and origin data differ in shape");
  }
  if (true_labels.size() != origin.rows() || target_labels.size() != origin.rows()) {
    throw ContractError("adversary label vectors must have one entry per row");
  }
  for (Eigen::Index i = 0; i < origin.rows(); ++i) {
    if (origin.row(i).squaredNorm() == 0.0) {
      throw DomainError("adversary origin row " + std::to_string(i) + " is the zero vector",
                        static_cast<std::size_t>(i));
    }
  }
}

void ModelConfig::validate() const {
  if (!(delta > -1.0 && delta <= 1.0)) {
    throw ContractError("similarity threshold delta must lie in (-1, 1]");
  }
  if (ridge && !(*ridge > 0.0)) throw ContractError("ridge weight must be > 0");
  if (nu && !(*nu >= 0.0)) throw ContractError("target offset nu must be >= 0");
}

double predict(const Weights& w, const Eigen::Ref<const Vector>& x) {
  if (w.size() != x.size()) {
    throw ContractError("predict: weights have " + std::to_string(w.size()) +
                        " entries, row has " + std::to_string(x.size()));
  }
  return w.dot(x);
}

double learner_loss(double prediction, double label) {
  const double r = prediction - label;
  return r * r;
}

double adversary_loss(double prediction, double target) { return learner_loss(prediction, target); }

namespace {

void check_columns(const Weights& w, Eigen::Index cols, const char* what) {
  if (w.size() != cols) {
    throw ContractError(std::string(what) + ": weights have " + std::to_string(w.size()) +
                        " entries but data has " + std::to_string(cols) + " columns");
  }
}

}  // namespace

double upper_objective(const Weights& w, const AdversaryBlock& adversary, const Dataset& static_set,
                       const ModelConfig& cfg) {
  if (static_set.size() == 0) throw ContractError("upper_objective: empty static set");
  if (adversary.current.rows() == 0) throw ContractError("upper_objective: empty adversary block");
  check_columns(w, static_set.rows.cols(), "upper_objective");
  check_columns(w, adversary.current.cols(), "upper_objective");

  const double n = static_cast<double>(static_set.size());
  const double m = static_cast<double>(adversary.current.rows());
  const Vector static_residual = static_set.rows * w - static_set.labels;
  const Vector adversary_residual = adversary.current * w - adversary.true_labels;
  return static_residual.squaredNorm() / n + adversary_residual.squaredNorm() / m +
         cfg.ridge_coefficient() * w.squaredNorm();
}

double lower_objective(const Weights& w, const AdversaryBlock& adversary) {
  if (adversary.current.rows() == 0) throw ContractError("lower_objective: empty adversary block");
  check_columns(w, adversary.current.cols(), "lower_objective");
  const double m = static_cast<double>(adversary.current.rows());
  return (adversary.current * w - adversary.target_labels).squaredNorm() / m;
}

double cosine_similarity(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) throw ContractError("cosine_similarity: length mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine similarity of a zero-norm vector");
  return a.dot(b) / (na * nb);
}

Vector constraint_values(const AdversaryBlock& adversary, double delta) {
  const Eigen::Index m = adversary.current.rows();
  if (adversary.origin.rows() != m || adversary.origin.cols() != adversary.current.cols()) {
    throw ContractError("constraint_values: current and origin differ in shape");
  }
  Vector g(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double nx = adversary.current.row(i).norm();
    const double n0 = adversary.origin.row(i).norm();
    if (nx == 0.0 || n0 == 0.0) {
      throw DomainError("zero-norm row " + std::to_string(i) + " in adversary block",
                        static_cast<std::size_t>(i));
    }
    g[i] = delta - adversary.current.row(i).dot(adversary.origin.row(i)) / (nx * n0);
  }
  return g;
}

double standard_deviation(const Vector& values) {
  if (values.size() == 0) return 0.0;
  const double mean = values.mean();
  return std::sqrt((values.array() - mean).square().mean());
}

}  // namespace advreg
