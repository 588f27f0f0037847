#pragma once

// The first-order stationarity conditions of the pessimistic bilevel
// program, written as an overdetermined nonsmooth equation system
//
//   grad_w F(w, X)                              = 0   (q rows)
//   grad_X F - lambda grad_X f - dg^T beta      = 0   (mq rows)
//   grad_X f + dg^T beta_hat                    = 0   (mq rows)
//   fb(beta_i, -g_i(X))                         = 0   (m rows)
//   fb(beta_hat_i, -g_i(X))                     = 0   (m rows)
//   fb(lambda, 0)                               = 0   (1 row)
//
// where fb is the Fischer-Burmeister function. The unknowns are ordered
// (w, X row-major, beta, beta_hat, lambda).

#include "advreg/model.hpp"

#include <cstddef>

namespace advreg {

/// Static data, adversary block and model settings of one bilevel instance.
/// The adversary's `current` data is ignored here: the unknown X lives in
/// the BlockVariable.
struct Problem {
  Dataset static_set;
  AdversaryBlock adversary;
  ModelConfig cfg;

  std::size_t q() const { return adversary.features(); }
  std::size_t m() const { return adversary.size(); }
  void validate() const;
};

/// z = (w, X) and xi = (beta, beta_hat, lambda).
class BlockVariable {
 public:
  BlockVariable() = default;
  BlockVariable(std::size_t q, std::size_t m);
  BlockVariable(std::size_t q, std::size_t m, Vector z, Vector xi);

  static BlockVariable pack(const Weights& w, const RowMatrix& X, const Vector& beta,
                            const Vector& beta_hat, double lambda);

  std::size_t q() const { return q_; }
  std::size_t m() const { return m_; }

  const Vector& z() const { return z_; }
  const Vector& xi() const { return xi_; }
  Vector& z() { return z_; }
  Vector& xi() { return xi_; }

  Weights w() const { return z_.head(static_cast<Eigen::Index>(q_)); }
  RowMatrix X() const;
  Vector beta() const { return xi_.head(static_cast<Eigen::Index>(m_)); }
  Vector beta_hat() const { return xi_.segment(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_)); }
  double lambda() const { return xi_[static_cast<Eigen::Index>(2 * m_)]; }

  /// (z, xi) as one vector, the solver's unknown.
  Vector stacked() const;
  static BlockVariable unstack(std::size_t q, std::size_t m, const Vector& v);

 private:
  std::size_t q_ = 0;
  std::size_t m_ = 0;
  Vector z_;
  Vector xi_;
};

/// Offsets of each block of residual rows.
struct RowLayout {
  Eigen::Index grad_w = 0;
  Eigen::Index upper_lagrangian = 0;
  Eigen::Index lower_lagrangian = 0;
  Eigen::Index fb_beta = 0;
  Eigen::Index fb_beta_hat = 0;
  Eigen::Index fb_lambda = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  static RowLayout of(std::size_t q, std::size_t m);
};

struct ResidualSystem {
  Vector phi;
  Matrix jacobian;
  RowLayout layout;
};

double lagrangian_upper(const BlockVariable& v, const Problem& problem);
double lagrangian_lower(const BlockVariable& v, const Problem& problem);

/// Fischer-Burmeister function sqrt(a^2 + b^2) - (a + b).
double fb(double a, double b);

/// An element of the generalized gradient of fb; (sqrt(1/2) - 1) in both
/// slots at the origin.
Eigen::Vector2d fb_gradient(double a, double b);

Vector assemble_residual(const BlockVariable& v, const Problem& problem);
Matrix assemble_jacobian(const BlockVariable& v, const Problem& problem);
ResidualSystem assemble(const BlockVariable& v, const Problem& problem, bool with_jacobian = true);

/// The stationarity conditions unpacked at a point, each as a worst-case
/// violation.
struct StationarityReport {
  double grad_w_inf = 0.0;           // |grad_w F|_inf
  double upper_lagrangian_inf = 0.0;  // |grad_X L|_inf
  double lower_lagrangian_inf = 0.0;  // |grad_X l|_inf
  double max_constraint = 0.0;        // max_i g_i(X)
  double min_multiplier = 0.0;        // min(beta, beta_hat, lambda)
  double max_complementarity = 0.0;   // max_i max(|beta_i g_i|, |beta_hat_i g_i|)

  double stationarity_inf() const;
};

StationarityReport check_conditions(const BlockVariable& v, const Problem& problem);

}  // namespace advreg
