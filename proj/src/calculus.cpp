#include "advreg/calculus.hpp"

#include "advreg/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace advreg {

namespace {

void require_match(const Weights& w, const AdversaryBlock& adversary) {
  if (w.size() != adversary.current.cols()) {
    throw ContractError("weights and adversary data disagree on the feature count");
  }
  if (adversary.current.rows() == 0) throw ContractError("empty adversary block");
}

// Entry (i, j) = (2/m) w_j (w.X_i - t_i).
RowMatrix residual_outer(const Weights& w, const RowMatrix& X, const Vector& targets) {
  const double m = static_cast<double>(X.rows());
  const Vector r = X * w - targets;
  return (2.0 / m) * r * w.transpose();
}

Matrix cross_wX(const Weights& w, const RowMatrix& X, const Vector& targets) {
  const Eigen::Index m = X.rows();
  const Eigen::Index q = X.cols();
  const double scale = 2.0 / static_cast<double>(m);
  const Vector r = X * w - targets;
  Matrix out(q, m * q);
  for (Eigen::Index i = 0; i < m; ++i) {
    auto block = out.middleCols(i * q, q);
    // block(k, j) = scale * (1{j=k} r_i + w_j X_ik)
    block = scale * X.row(i).transpose() * w.transpose();
    block.diagonal().array() += scale * r[i];
  }
  return out;
}

std::vector<Matrix> outer_blocks(const Weights& w, Eigen::Index m) {
  const Matrix block = (2.0 / static_cast<double>(m)) * w * w.transpose();
  return std::vector<Matrix>(static_cast<std::size_t>(m), block);
}

}  // namespace

Matrix ConstraintJacobian::dense() const {
  const Eigen::Index m = blocks.rows();
  const Eigen::Index q = blocks.cols();
  Matrix out = Matrix::Zero(m, m * q);
  for (Eigen::Index i = 0; i < m; ++i) out.block(i, i * q, 1, q) = blocks.row(i);
  return out;
}

Vector grad_upper_w(const Weights& w, const AdversaryBlock& adversary, const Dataset& static_set,
                    const ModelConfig& cfg) {
  require_match(w, adversary);
  if (static_set.rows.cols() != w.size()) throw ContractError("static data column mismatch");
  const double n = static_cast<double>(static_set.size());
  const double m = static_cast<double>(adversary.current.rows());
  const auto& D = static_set.rows;
  const auto& X = adversary.current;
  return (2.0 / n) * D.transpose() * (D * w - static_set.labels) +
         (2.0 / m) * X.transpose() * (X * w - adversary.true_labels) +
         2.0 * cfg.ridge_coefficient() * w;
}

Matrix hess_upper_ww(const Weights& w, const AdversaryBlock& adversary, const Dataset& static_set,
                     const ModelConfig& cfg) {
  require_match(w, adversary);
  if (static_set.rows.cols() != w.size()) throw ContractError("static data column mismatch");
  const double n = static_cast<double>(static_set.size());
  const double m = static_cast<double>(adversary.current.rows());
  const auto& D = static_set.rows;
  const auto& X = adversary.current;
  Matrix h = (2.0 / n) * D.transpose() * D + (2.0 / m) * X.transpose() * X;
  h.diagonal().array() += 2.0 * cfg.ridge_coefficient();
  return h;
}

RowMatrix grad_upper_X(const Weights& w, const AdversaryBlock& adversary) {
  require_match(w, adversary);
  return residual_outer(w, adversary.current, adversary.true_labels);
}

RowMatrix grad_lower_X(const Weights& w, const AdversaryBlock& adversary) {
  require_match(w, adversary);
  return residual_outer(w, adversary.current, adversary.target_labels);
}

std::vector<Matrix> hess_upper_XX(const Weights& w, const AdversaryBlock& adversary) {
  require_match(w, adversary);
  return outer_blocks(w, adversary.current.rows());
}

std::vector<Matrix> hess_lower_XX(const Weights& w, const AdversaryBlock& adversary) {
  require_match(w, adversary);
  return outer_blocks(w, adversary.current.rows());
}

Matrix cross_lower_wX(const Weights& w, const AdversaryBlock& adversary) {
  require_match(w, adversary);
  return cross_wX(w, adversary.current, adversary.target_labels);
}

Matrix cross_upper_wX(const Weights& w, const AdversaryBlock& adversary) {
  require_match(w, adversary);
  return cross_wX(w, adversary.current, adversary.true_labels);
}

Vector constraint_row_gradient(const Eigen::Ref<const Vector>& x,
                               const Eigen::Ref<const Vector>& x0) {
  const double nx = x.norm();
  const double n0 = x0.norm();
  if (nx == 0.0 || n0 == 0.0) throw DomainError("constraint gradient at a zero-norm row");
  const double d = x.dot(x0) / (nx * n0);
  return -(x0 / (nx * n0) - d * x / (nx * nx));
}

Matrix constraint_row_hessian(const Eigen::Ref<const Vector>& x,
                              const Eigen::Ref<const Vector>& x0) {
  const double nx = x.norm();
  const double n0 = x0.norm();
  if (nx == 0.0 || n0 == 0.0) throw DomainError("constraint Hessian at a zero-norm row");
  const double d = x.dot(x0) / (nx * n0);
  const double nx2 = nx * nx;
  Matrix h = (x * x0.transpose() + x0 * x.transpose()) / (nx2 * nx * n0) -
             (3.0 * d / (nx2 * nx2)) * x * x.transpose();
  h.diagonal().array() += d / nx2;
  return h;
}

ConstraintJacobian grad_constraints_X(const AdversaryBlock& adversary) {
  const Eigen::Index m = adversary.current.rows();
  ConstraintJacobian jac{RowMatrix(m, adversary.current.cols())};
  for (Eigen::Index i = 0; i < m; ++i) {
    try {
      jac.blocks.row(i) = constraint_row_gradient(adversary.current.row(i).transpose(),
                                                  adversary.origin.row(i).transpose())
                              .transpose();
    } catch (const DomainError&) {
      throw DomainError("zero-norm row " + std::to_string(i) + " in adversary block",
                        static_cast<std::size_t>(i));
    }
  }
  return jac;
}

std::vector<Matrix> hess_constraints_XX(const AdversaryBlock& adversary) {
  std::vector<Matrix> blocks;
  blocks.reserve(static_cast<std::size_t>(adversary.current.rows()));
  for (Eigen::Index i = 0; i < adversary.current.rows(); ++i) {
    try {
      blocks.push_back(constraint_row_hessian(adversary.current.row(i).transpose(),
                                              adversary.origin.row(i).transpose()));
    } catch (const DomainError&) {
      throw DomainError("zero-norm row " + std::to_string(i) + " in adversary block",
                        static_cast<std::size_t>(i));
    }
  }
  return blocks;
}

GradientBundle gradient_bundle(const Weights& w, const AdversaryBlock& adversary,
                               const Dataset& static_set, const ModelConfig& cfg) {
  GradientBundle b;
  b.dF_dw = grad_upper_w(w, adversary, static_set, cfg);
  b.dF_dX = grad_upper_X(w, adversary);
  b.df_dX = grad_lower_X(w, adversary);
  b.d2F_dww = hess_upper_ww(w, adversary, static_set, cfg);
  b.d2L_dXX = hess_upper_XX(w, adversary);
  b.d2f_dwX = cross_lower_wX(w, adversary);
  b.dg_dX = grad_constraints_X(adversary);
  b.d2g_dXX = hess_constraints_XX(adversary);
  return b;
}

// ---------------------------------------------------------------------------

Matrix fd_jacobian(const VectorField& f, const Vector& point, double step) {
  if (!(step > 0.0)) throw ContractError("finite-difference step must be > 0");
  Vector x = point;
  Matrix jac;
  for (Eigen::Index k = 0; k < point.size(); ++k) {
    x[k] = point[k] + step;
    const Vector plus = f(x);
    x[k] = point[k] - step;
    const Vector minus = f(x);
    x[k] = point[k];
    if (k == 0) jac.resize(plus.size(), point.size());
    jac.col(k) = (plus - minus) / (2.0 * step);
  }
  return jac;
}

namespace {

FdReport compare(const Matrix& analytic, const Matrix& numeric, double tol) {
  FdReport report;
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    report.passed = false;
    report.max_rel_error = std::numeric_limits<double>::infinity();
    return report;
  }
  for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
    for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
      const double err =
          std::abs(analytic(r, c) - numeric(r, c)) / std::max(1.0, std::abs(analytic(r, c)));
      if (!(err <= report.max_rel_error)) {
        report.max_rel_error = err;
        report.worst_row = r;
        report.worst_col = c;
      }
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace

FdReport fd_check(const ScalarField& f, const VectorField& grad, const Vector& point, double step,
                  double tol) {
  const Matrix numeric =
      fd_jacobian([&](const Vector& x) { return Vector::Constant(1, f(x)); }, point, step);
  return compare(grad(point).transpose(), numeric, tol);
}

FdReport fd_check_jacobian(const VectorField& f, const MatrixField& jacobian, const Vector& point,
                           double step, double tol) {
  return compare(jacobian(point), fd_jacobian(f, point, step), tol);
}

// ---------------------------------------------------------------------------

namespace {

struct RandomInstance {
  Dataset static_set;
  AdversaryBlock adversary;
  Weights w;
  ModelConfig cfg;
};

RandomInstance random_instance(Rng& rng) {
  const auto q = static_cast<Eigen::Index>(1 + rng.index(5));
  const auto n = static_cast<Eigen::Index>(1 + rng.index(6));
  const auto m = static_cast<Eigen::Index>(1 + rng.index(3));
  auto fill = [&](auto& mat) {
    for (Eigen::Index i = 0; i < mat.size(); ++i) mat.data()[i] = rng.uniform_open(0.1, 1.0);
  };
  RandomInstance inst;
  inst.static_set.rows.resize(n, q);
  inst.static_set.labels.resize(n);
  fill(inst.static_set.rows);
  fill(inst.static_set.labels);
  RowMatrix origin(m, q), current(m, q);
  Vector y(m);
  fill(origin);
  fill(current);
  fill(y);
  inst.adversary = AdversaryBlock::from_origin(origin, y, 0.0);
  fill(inst.adversary.target_labels);
  inst.adversary.current = current;
  inst.w.resize(q);
  fill(inst.w);
  inst.cfg.ridge = 100.0;
  inst.cfg.delta = rng.uniform_open(0.1, 1.0);
  return inst;
}

Vector flatten(const RowMatrix& X) { return Eigen::Map<const Vector>(X.data(), X.size()); }

RowMatrix unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const RowMatrix>(v.data(), rows, cols);
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index size = 0;
  for (const auto& b : blocks) size += b.rows();
  Matrix out = Matrix::Zero(size, size);
  Eigen::Index offset = 0;
  for (const auto& b : blocks) {
    out.block(offset, offset, b.rows(), b.cols()) = b;
    offset += b.rows();
  }
  return out;
}

}  // namespace

std::vector<DerivativeCheck> run_derivative_checks(std::uint64_t seed, int instances) {
  constexpr double kFirst = 1e-5;
  constexpr double kSecond = 1e-4;
  constexpr double kStep = 1e-6;
  std::vector<DerivativeCheck> checks = {
      {"grad_upper_w", kFirst},       {"hess_upper_ww", kSecond},
      {"grad_upper_X", kFirst},       {"grad_lower_X", kFirst},
      {"hess_upper_XX", kSecond},     {"hess_lower_XX", kSecond},
      {"cross_upper_wX", kSecond},    {"cross_lower_wX", kSecond},
      {"grad_constraints_X", kFirst}, {"hess_constraints_XX", kSecond},
  };
  auto record = [&](std::size_t idx, const FdReport& r) {
    auto& c = checks[idx];
    c.instances += 1;
    c.max_rel_error = std::max(c.max_rel_error, r.max_rel_error);
    if (!(r.max_rel_error <= c.tolerance)) c.failures += 1;
  };

  Rng rng(seed);
  for (int t = 0; t < instances; ++t) {
    const RandomInstance inst = random_instance(rng);
    const auto& S = inst.static_set;
    const auto& A = inst.adversary;
    const auto& cfg = inst.cfg;
    const Eigen::Index m = A.current.rows();
    const Eigen::Index q = A.current.cols();
    const Vector x_flat = flatten(A.current);
    auto at = [&](const Vector& xf) { return A.with_current(unflatten(xf, m, q)); };

    record(0, fd_check([&](const Vector& w) { return upper_objective(w, A, S, cfg); },
                       [&](const Vector& w) { return grad_upper_w(w, A, S, cfg); }, inst.w, kStep,
                       kFirst));
    record(1, fd_check_jacobian([&](const Vector& w) { return grad_upper_w(w, A, S, cfg); },
                                [&](const Vector& w) { return hess_upper_ww(w, A, S, cfg); },
                                inst.w, kStep, kSecond));
    record(2, fd_check([&](const Vector& xf) { return upper_objective(inst.w, at(xf), S, cfg); },
                       [&](const Vector& xf) { return flatten(grad_upper_X(inst.w, at(xf))); },
                       x_flat, kStep, kFirst));
    record(3, fd_check([&](const Vector& xf) { return lower_objective(inst.w, at(xf)); },
                       [&](const Vector& xf) { return flatten(grad_lower_X(inst.w, at(xf))); },
                       x_flat, kStep, kFirst));
    record(4, fd_check_jacobian(
                  [&](const Vector& xf) { return flatten(grad_upper_X(inst.w, at(xf))); },
                  [&](const Vector& xf) { return block_diagonal(hess_upper_XX(inst.w, at(xf))); },
                  x_flat, kStep, kSecond));
    record(5, fd_check_jacobian(
                  [&](const Vector& xf) { return flatten(grad_lower_X(inst.w, at(xf))); },
                  [&](const Vector& xf) { return block_diagonal(hess_lower_XX(inst.w, at(xf))); },
                  x_flat, kStep, kSecond));
    record(6, fd_check_jacobian([&](const Vector& w) { return flatten(grad_upper_X(w, A)); },
                                [&](const Vector& w) { return Matrix(cross_upper_wX(w, A).transpose()); },
                                inst.w, kStep, kSecond));
    record(7, fd_check_jacobian([&](const Vector& w) { return flatten(grad_lower_X(w, A)); },
                                [&](const Vector& w) { return Matrix(cross_lower_wX(w, A).transpose()); },
                                inst.w, kStep, kSecond));
    record(8, fd_check_jacobian([&](const Vector& xf) { return constraint_values(at(xf), cfg.delta); },
                                [&](const Vector& xf) { return grad_constraints_X(at(xf)).dense(); },
                                x_flat, kStep, kFirst));
    record(9, fd_check_jacobian(
                  [&](const Vector& xf) { return flatten(grad_constraints_X(at(xf)).blocks); },
                  [&](const Vector& xf) { return block_diagonal(hess_constraints_XX(at(xf))); },
                  x_flat, kStep, kSecond));
  }
  return checks;
}

}  // namespace advreg
