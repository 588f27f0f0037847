#pragma once

// Globalized nonsmooth Levenberg-Marquardt method for overdetermined
// residual systems, minimizing the merit 0.5 * |phi|^2.
//
// Each iteration tries the damped Gauss-Newton step with damping
// min(gamma1, gamma2 * |phi|). A step that reduces the merit by the factor
// kappa is taken in full. Otherwise the direction is replaced by the
// steepest-descent direction when it is nearly orthogonal to it (angle_rho)
// or too short (min_step), and an Armijo backtracking search picks the step
// length. The run stops when |phi| <= eps, when the residual stops
// shrinking (ratio >= eta after more than `stall_window` iterations), or
// after max_iter iterations.

#include "advreg/model.hpp"
#include "advreg/stationarity.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace advreg {

struct SolverConfig {
  double eps = 1e-6;
  double kappa = 0.8;
  double sigma = 1e-4;
  double step_beta = 0.5;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double angle_rho = 1e-8;
  double min_step = 1e-12;
  double eta = 0.995;
  int stall_window = 50;
  int max_iter = 1000;
  int max_backtracks = 60;
  /// Extra full LM steps taken after the residual first drops below eps,
  /// kept only while they lower the merit.
  int refine_steps = 3;

  void validate() const;
};

enum class SolveStatus { Converged, Stalled, MaxIterations };
enum class StepKind { FullLM, LineSearchLM, Gradient };

std::string to_string(SolveStatus status);
std::string to_string(StepKind kind);

struct IterationRecord {
  int iteration = 0;
  double merit = 0.0;
  double residual_norm = 0.0;
  StepKind step = StepKind::FullLM;
  double damping = 0.0;
  double step_length = 1.0;
};

/// Evaluates phi(x) and, when `jacobian` is non-null, its Jacobian. A point
/// outside the domain must yield a non-finite phi.
using ResidualEvaluator = std::function<void(const Vector& x, Vector& phi, Matrix* jacobian)>;

struct LeastSquaresOutcome {
  Vector x;
  double residual_norm = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  std::vector<IterationRecord> trace;
};

struct SolveOutcome {
  BlockVariable point;
  double residual_norm = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  std::vector<IterationRecord> trace;
};

double merit(const Vector& phi);

/// Solves (J^T J + damping I) d = -J^T phi.
Vector lm_step(const Vector& phi, const Matrix& jacobian, double damping);

LeastSquaresOutcome minimize_residual(const ResidualEvaluator& residual, const Vector& start,
                                      const SolverConfig& cfg);

/// Default start: w from the ridge fit on static and adversary rows, X at its
/// origin, lambda = 1 and beta = beta_hat = 1e-2.
BlockVariable initial_point(const Problem& problem);

SolveOutcome solve(const BlockVariable& start, const Problem& problem, const SolverConfig& cfg);
SolveOutcome solve(const Problem& problem, const SolverConfig& cfg);

/// One JSON object per line: iteration, merit, residual_norm, step, damping,
/// step_length.
void write_trace(std::ostream& out, const std::vector<IterationRecord>& trace);

}  // namespace advreg
