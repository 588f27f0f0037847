#pragma once

// Analytic first and second derivatives of both objectives and of the
// similarity constraints, plus a central-difference checker.
//
// Matrices indexed by the adversary's data use the row-major flattening
// X_flat[i*q + j] = X(i, j).
//
// Constraint derivatives are derivatives of g_i = delta - cos(X_i, X0_i).
// The first derivative is therefore the negative of the gradient of the
// cosine; the second derivative is the negative of the cosine's Hessian.

#include "advreg/model.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace advreg {

/// Per-row constraint gradients. Row i of `blocks` holds dg_i/dX_i; every
/// other column of the full m x mq Jacobian is zero.
struct ConstraintJacobian {
  RowMatrix blocks;

  Matrix dense() const;
};

struct GradientBundle {
  Vector dF_dw;                      // q
  RowMatrix dF_dX;                   // m x q
  RowMatrix df_dX;                   // m x q
  Matrix d2F_dww;                    // q x q
  std::vector<Matrix> d2L_dXX;       // m blocks q x q (upper objective)
  Matrix d2f_dwX;                    // q x mq
  ConstraintJacobian dg_dX;          // m x mq, block sparse
  std::vector<Matrix> d2g_dXX;       // m blocks q x q
};

Vector grad_upper_w(const Weights& w, const AdversaryBlock& adversary, const Dataset& static_set,
                    const ModelConfig& cfg);
Matrix hess_upper_ww(const Weights& w, const AdversaryBlock& adversary, const Dataset& static_set,
                     const ModelConfig& cfg);
RowMatrix grad_upper_X(const Weights& w, const AdversaryBlock& adversary);
RowMatrix grad_lower_X(const Weights& w, const AdversaryBlock& adversary);

/// Diagonal blocks of the Hessian of the upper objective in X; equal to
/// those of the lower objective since both are (2/m) w w^T.
std::vector<Matrix> hess_upper_XX(const Weights& w, const AdversaryBlock& adversary);
std::vector<Matrix> hess_lower_XX(const Weights& w, const AdversaryBlock& adversary);

/// q x mq matrix of mixed partials d^2 f / (dw_k dX_ij), at column i*q + j:
/// (2/m) * (1{j=k} * (w.X_i - Z_i) + w_j * X_ik).
Matrix cross_lower_wX(const Weights& w, const AdversaryBlock& adversary);
/// Same as cross_lower_wX with the true labels Y in place of the targets.
Matrix cross_upper_wX(const Weights& w, const AdversaryBlock& adversary);

/// Gradient of delta - cos(x, x0) with respect to x.
Vector constraint_row_gradient(const Eigen::Ref<const Vector>& x,
                               const Eigen::Ref<const Vector>& x0);
/// Hessian of delta - cos(x, x0) with respect to x.
Matrix constraint_row_hessian(const Eigen::Ref<const Vector>& x,
                              const Eigen::Ref<const Vector>& x0);

ConstraintJacobian grad_constraints_X(const AdversaryBlock& adversary);
std::vector<Matrix> hess_constraints_XX(const AdversaryBlock& adversary);

GradientBundle gradient_bundle(const Weights& w, const AdversaryBlock& adversary,
                               const Dataset& static_set, const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Finite differences

using ScalarField = std::function<double(const Vector&)>;
using VectorField = std::function<Vector(const Vector&)>;
using MatrixField = std::function<Matrix(const Vector&)>;

struct FdReport {
  double max_rel_error = 0.0;
  Eigen::Index worst_row = -1;
  Eigen::Index worst_col = -1;
  bool passed = true;
};

/// Central differences of f against grad at `point`. The error of entry k is
/// |analytic - numeric| / max(1, |analytic|).
FdReport fd_check(const ScalarField& f, const VectorField& grad, const Vector& point,
                  double step = 1e-6, double tol = 1e-5);

/// Central differences of a vector field against its Jacobian.
FdReport fd_check_jacobian(const VectorField& f, const MatrixField& jacobian, const Vector& point,
                           double step = 1e-6, double tol = 1e-5);

Matrix fd_jacobian(const VectorField& f, const Vector& point, double step = 1e-6);

struct DerivativeCheck {
  std::string name;
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  int instances = 0;
  int failures = 0;
  bool passed() const { return failures == 0; }
};

/// Checks every analytic derivative against central differences on seeded
/// random instances with q <= 5, n <= 6, m <= 3 and entries in (0.1, 1).
std::vector<DerivativeCheck> run_derivative_checks(std::uint64_t seed, int instances = 100);

}  // namespace advreg
