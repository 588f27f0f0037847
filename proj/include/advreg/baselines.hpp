#pragma once

// Comparison models: the plain least-squares predictor ("LinReg") and an
// optimistic Stackelberg surrogate ("B&S") whose adversary has a unique
// best response thanks to a proximal term.

#include "advreg/model.hpp"

#include <optional>
#include <string>

namespace advreg {

enum class BaselineKind { LinReg, BS };

struct BsConfig {
  /// Proximal weight rho_a of the adversary's (rho_a / 2) |x - x0|^2 term.
  double proximal = 1.0;
  double gradient_tol = 1e-6;
  int max_iter = 2000;
};

struct BaselineModel {
  BaselineKind kind = BaselineKind::LinReg;
  Weights weights;
  std::optional<double> ridge;
  /// B&S only.
  double proximal = 0.0;
  bool converged = true;
  int iterations = 0;
};

std::string to_string(BaselineKind kind);

/// argmin_w (1/n) sum (w.D_i - y_i)^2 + (1/rho) |w|^2 by the normal
/// equations. Throws SolverError when the system is singular.
Weights fit_linreg(const Dataset& train, std::optional<double> ridge);

/// Best response of the proximal adversary for one row:
/// argmin_x (w.x - z)^2 + (rho_a / 2) |x - x0|^2.
Vector bs_best_response(const Weights& w, const Eigen::Ref<const Vector>& x0, double target,
                        double proximal);

/// Upper objective with every adversary row replaced by its best response.
double bs_objective(const Weights& w, const Dataset& static_set, const AdversaryBlock& adversary,
                    const ModelConfig& cfg, double proximal);
Vector bs_gradient(const Weights& w, const Dataset& static_set, const AdversaryBlock& adversary,
                   const ModelConfig& cfg, double proximal);

/// Minimizes bs_objective by gradient descent with Armijo backtracking,
/// starting from the LinReg fit on the static and original adversary rows.
/// Non-convergence is reported through `converged`; the best iterate is kept.
BaselineModel fit_bs(const Dataset& static_set, const AdversaryBlock& adversary,
                     const ModelConfig& cfg, const BsConfig& bs = {});

/// Static rows followed by the adversary's original rows with true labels.
Dataset combined_training_rows(const Dataset& static_set, const AdversaryBlock& adversary);

}  // namespace advreg
