#include "advreg/lm_solver.hpp"

#include "advreg/baselines.hpp"

#include "json.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace advreg {

void SolverConfig::validate() const {
  auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!(eps > 0.0)) throw ContractError("solver eps must be > 0");
  if (!open_unit(kappa)) throw ContractError("solver kappa must lie in (0, 1)");
  if (!open_unit(sigma)) throw ContractError("solver sigma must lie in (0, 1)");
  if (!open_unit(step_beta)) throw ContractError("solver step_beta must lie in (0, 1)");
  if (!(gamma1 > 0.0 && gamma2 > 0.0)) throw ContractError("solver gamma1, gamma2 must be > 0");
  if (!(angle_rho > 0.0)) throw ContractError("solver angle_rho must be > 0");
  if (!(min_step >= 0.0)) throw ContractError("solver min_step must be >= 0");
  if (!open_unit(eta)) throw ContractError("solver eta must lie in (0, 1)");
  if (stall_window < 0) throw ContractError("solver stall window must be >= 0");
  if (max_iter < 0) throw ContractError("solver max_iter must be >= 0");
  if (max_backtracks < 1) throw ContractError("solver max_backtracks must be >= 1");
  if (refine_steps < 0) throw ContractError("solver refine_steps must be >= 0");
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::Stalled: return "Stalled";
    case SolveStatus::MaxIterations: return "MaxIterations";
  }
  return "?";
}

std::string to_string(StepKind kind) {
  switch (kind) {
    case StepKind::FullLM: return "lm";
    case StepKind::LineSearchLM: return "lm-linesearch";
    case StepKind::Gradient: return "gradient";
  }
  return "?";
}

double merit(const Vector& phi) { return 0.5 * phi.squaredNorm(); }

Vector lm_step(const Vector& phi, const Matrix& jacobian, double damping) {
  if (!(damping > 0.0)) throw ContractError("lm_step: damping must be > 0");
  if (jacobian.rows() != phi.size()) throw ContractError("lm_step: Jacobian/residual mismatch");
  Matrix normal = jacobian.transpose() * jacobian;
  normal.diagonal().array() += damping;
  const Vector rhs = -(jacobian.transpose() * phi);
  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() != Eigen::Success) {
    const Vector diag = normal.diagonal();
    std::ostringstream msg;
    msg << "lm_step: damped normal matrix is not positive definite (diagonal range "
        << diag.minCoeff() << " .. " << diag.maxCoeff() << ", damping " << damping << ")";
    throw SolverError(msg.str());
  }
  Vector d = llt.solve(rhs);
  if (!d.allFinite()) {
    const double diag_ratio = normal.diagonal().maxCoeff() / normal.diagonal().minCoeff();
    std::ostringstream msg;
    msg << "lm_step: non-finite direction (diagonal ratio " << diag_ratio << ")";
    throw SolverError(msg.str());
  }
  return d;
}

namespace {

double merit_at(const ResidualEvaluator& residual, const Vector& x, Vector& phi) {
  residual(x, phi, nullptr);
  if (!phi.allFinite()) return std::numeric_limits<double>::infinity();
  return merit(phi);
}

}  // namespace

LeastSquaresOutcome minimize_residual(const ResidualEvaluator& residual, const Vector& start,
                                      const SolverConfig& cfg) {
  cfg.validate();
  LeastSquaresOutcome out;
  Vector x = start;
  Vector phi;
  Matrix J;
  residual(x, phi, &J);
  if (!phi.allFinite() || !J.allFinite()) {
    throw ContractError("solver start point has a non-finite residual");
  }
  double norm = phi.norm();
  double previous_norm = norm;
  Vector best_x = x;
  double best_norm = norm;

  Vector trial_phi;
  int k = 0;
  out.status = SolveStatus::MaxIterations;
  for (;; ++k) {
    if (norm <= cfg.eps) {
      out.status = SolveStatus::Converged;
      break;
    }
    if (k > cfg.stall_window && k > 0 && norm / previous_norm >= cfg.eta) {
      out.status = SolveStatus::Stalled;
      break;
    }
    if (k >= cfg.max_iter) break;

    const double psi = merit(phi);
    const Vector grad = J.transpose() * phi;
    const double damping = std::min(cfg.gamma1, cfg.gamma2 * norm);

    IterationRecord rec;
    rec.iteration = k + 1;
    rec.damping = damping;

    Vector d;
    bool have_lm = true;
    try {
      d = lm_step(phi, J, damping);
    } catch (const SolverError&) {
      have_lm = false;
    }

    bool accepted = false;
    Vector next;
    if (have_lm) {
      next = x + d;
      const double psi_full = merit_at(residual, next, trial_phi);
      if (psi_full <= cfg.kappa * psi) {
        accepted = true;
        rec.step = StepKind::FullLM;
        rec.step_length = 1.0;
      }
    }
    if (!accepted) {
      rec.step = StepKind::LineSearchLM;
      const double gnorm = grad.norm();
      if (!have_lm || grad.dot(d) > -cfg.angle_rho * gnorm * d.norm() || d.norm() < cfg.min_step) {
        d = -grad;
        rec.step = StepKind::Gradient;
      }
      const double slope = grad.dot(d);
      double alpha = 1.0;
      for (int b = 0; b < cfg.max_backtracks; ++b) {
        next = x + alpha * d;
        const double psi_trial = merit_at(residual, next, trial_phi);
        if (psi_trial <= psi + alpha * cfg.sigma * slope) {
          accepted = true;
          break;
        }
        alpha *= cfg.step_beta;
      }
      rec.step_length = alpha;
    }
    if (!accepted) {
      // No descent is possible along either direction.
      out.status = SolveStatus::Stalled;
      break;
    }

    x = std::move(next);
    residual(x, phi, &J);
    previous_norm = norm;
    norm = phi.norm();
    rec.merit = merit(phi);
    rec.residual_norm = norm;
    out.trace.push_back(rec);
    if (norm < best_norm) {
      best_norm = norm;
      best_x = x;
    }
  }

  if (out.status == SolveStatus::Converged) {
    // Near a solution the full LM step converges fast; a few extra steps
    // push the complementarity rows well below eps at little cost.
    for (int r = 0; r < cfg.refine_steps && norm > 0.0; ++r) {
      const double damping = std::min(cfg.gamma1, cfg.gamma2 * norm);
      Vector next;
      try {
        next = x + lm_step(phi, J, damping);
      } catch (const SolverError&) {
        break;
      }
      const double psi_trial = merit_at(residual, next, trial_phi);
      if (!(psi_trial < merit(phi))) break;
      x = std::move(next);
      residual(x, phi, &J);
      norm = phi.norm();
      ++k;
      IterationRecord rec;
      rec.iteration = k;
      rec.merit = merit(phi);
      rec.residual_norm = norm;
      rec.step = StepKind::FullLM;
      rec.damping = damping;
      out.trace.push_back(rec);
    }
  }

  out.iterations = k;
  if (out.status == SolveStatus::Converged) {
    out.x = x;
    out.residual_norm = norm;
  } else {
    out.x = best_x;
    out.residual_norm = best_norm;
  }
  return out;
}

BlockVariable initial_point(const Problem& problem) {
  const Dataset combined = combined_training_rows(problem.static_set, problem.adversary);
  Weights w;
  try {
    w = fit_linreg(combined, problem.cfg.ridge);
  } catch (const SolverError&) {
    w = Matrix(combined.rows).completeOrthogonalDecomposition().solve(combined.labels);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(problem.m());
  return BlockVariable::pack(w, problem.adversary.origin, Vector::Constant(m, 1e-2),
                             Vector::Constant(m, 1e-2), 1.0);
}

SolveOutcome solve(const BlockVariable& start, const Problem& problem, const SolverConfig& cfg) {
  problem.validate();
  const std::size_t q = problem.q();
  const std::size_t m = problem.m();
  if (start.q() != q || start.m() != m) {
    throw ContractError("solver start point does not match the problem dimensions");
  }
  ResidualEvaluator residual = [&](const Vector& x, Vector& phi, Matrix* jacobian) {
    try {
      ResidualSystem sys =
          assemble(BlockVariable::unstack(q, m, x), problem, jacobian != nullptr);
      phi = std::move(sys.phi);
      if (jacobian) *jacobian = std::move(sys.jacobian);
    } catch (const DomainError&) {
      // A zero-norm row leaves the domain of the cosine constraints.
      phi = Vector::Constant(RowLayout::of(q, m).rows, std::numeric_limits<double>::quiet_NaN());
      if (jacobian) jacobian->resize(0, 0);
    }
  };
  LeastSquaresOutcome ls = minimize_residual(residual, start.stacked(), cfg);
  SolveOutcome out;
  out.point = BlockVariable::unstack(q, m, ls.x);
  out.residual_norm = ls.residual_norm;
  out.status = ls.status;
  out.iterations = ls.iterations;
  out.trace = std::move(ls.trace);
  return out;
}

SolveOutcome solve(const Problem& problem, const SolverConfig& cfg) {
  return solve(initial_point(problem), problem, cfg);
}

void write_trace(std::ostream& out, const std::vector<IterationRecord>& trace) {
  for (const auto& r : trace) {
    nlohmann::json j = {{"iteration", r.iteration},         {"merit", r.merit},
                        {"residual_norm", r.residual_norm}, {"step", to_string(r.step)},
                        {"damping", r.damping},             {"step_length", r.step_length}};
    out << j.dump() << '\n';
  }
}

}  // namespace advreg
