#pragma once

// Instance generators and brute-force oracles shared by the unit tests and
// the acceptance runner. Oracles here deliberately avoid the library's own
// helpers so they can catch errors in them.

#include "advreg/model.hpp"
#include "advreg/random.hpp"
#include "advreg/stationarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace advreg::testing {

inline RowMatrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  RowMatrix a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = rng.uniform(lo, hi);
  return a;
}

inline Vector random_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

/// Toy bilevel instance with Z = Y. It has exact stationary points: w is
/// the ridge fit on the static rows and each adversary row is rescaled so
/// that w.x = y.
inline Problem untargeted_toy(std::uint64_t seed) {
  Rng rng(seed);
  const auto q = static_cast<Eigen::Index>(1 + rng.index(3));
  const auto m = static_cast<Eigen::Index>(1 + rng.index(2));
  const auto n = q + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(6 - q)));
  Problem p;
  p.static_set.rows = random_matrix(rng, n, q, 0.1, 1.0);
  p.static_set.labels = random_vector(rng, n, 0.1, 1.0);
  const RowMatrix x0 = random_matrix(rng, m, q, 0.1, 1.0);
  const Vector y = random_vector(rng, m, 0.1, 1.0);
  p.adversary = AdversaryBlock::from_origin(x0, y, 0.0);
  p.cfg.delta = 0.9;
  p.cfg.ridge = 100.0;
  p.cfg.nu = 0.0;
  return p;
}

/// Toy instance with an exact stationary point where every cosine constraint
/// is active: targets are 0, the stationary rows are orthogonal to w, each
/// origin sits at angle acos(delta) on the far side of w, and the static
/// labels are chosen so that grad_w F vanishes there.
/// Zero dimensions are drawn at random (q in {2, 3}, m in {1, 2}, q <= n <= 5).
inline Problem active_toy(std::uint64_t seed, Eigen::Index q = 0, Eigen::Index m = 0, Eigen::Index n = 0) {
  Rng rng(seed);
  const Eigen::Index q_draw = static_cast<Eigen::Index>(2 + rng.index(2));
  const Eigen::Index m_draw = static_cast<Eigen::Index>(1 + rng.index(2));
  if (q == 0) q = q_draw;
  if (m == 0) m = m_draw;
  const Eigen::Index n_draw = q + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(std::max<Eigen::Index>(1, 6 - q))));
  if (n == 0) n = n_draw;
  const double delta = rng.uniform(0.85, 0.99);
  const double nu = rng.uniform(0.1, 0.5);
  const double rho = 100.0;
  const Vector w = random_vector(rng, q, -1.0, 1.0);
  const Vector w_hat = w.normalized();
  RowMatrix x_star(m, q), x0(m, q);
  for (Eigen::Index i = 0; i < m; ++i) {
    Vector x = random_vector(rng, q, -1.0, 1.0);
    x -= x.dot(w_hat) * w_hat;
    const double scale = rng.uniform(0.5, 2.0);
    x_star.row(i) = x.transpose();
    x0.row(i) = (scale * (delta * x.normalized() - std::sqrt(1.0 - delta * delta) * w_hat)).transpose();
  }
  Problem p;
  p.static_set.rows = random_matrix(rng, n, q, -1.0, 1.0);
  p.adversary = AdversaryBlock::from_origin(x0, Vector::Constant(m, -nu), nu);
  p.cfg.delta = delta;
  p.cfg.ridge = rho;
  p.cfg.nu = nu;
  // With w.x* = 0 and Y = -nu the adversary term of grad_w F is (2 nu / m) sum x*.
  const Vector adversary_part = (2.0 * nu / static_cast<double>(m)) * x_star.colwise().sum().transpose();
  const Vector target = -(static_cast<double>(n) / 2.0) * (adversary_part + (2.0 / rho) * w);
  const Matrix Dt = p.static_set.rows.transpose();
  const Vector r = Dt.completeOrthogonalDecomposition().solve(target);
  p.static_set.labels = p.static_set.rows * w - r;
  return p;
}

/// The toy suite: alternating untargeted and active-constraint instances.
inline Problem toy_problem(std::uint64_t index) {
  return index % 2 == 0 ? untargeted_toy(1000 + index) : active_toy(2000 + index);
}

/// q = m = n = 1, ridge off, Y = Z, w fits every row exactly, X = X0 and all
/// multipliers zero: every residual row vanishes exactly.
struct ConstructedPoint {
  Problem problem;
  BlockVariable point;
};

inline ConstructedPoint constructed_stationary_point() {
  ConstructedPoint c;
  const double w = 2.0;
  c.problem.static_set.rows = RowMatrix::Constant(1, 1, 0.5);
  c.problem.static_set.labels = Vector::Constant(1, w * 0.5);
  c.problem.adversary = AdversaryBlock::from_origin(RowMatrix::Constant(1, 1, 0.4), Vector::Constant(1, w * 0.4), 0.0);
  c.problem.cfg.delta = 0.95;
  c.problem.cfg.ridge.reset();
  c.problem.cfg.nu = 0.0;
  c.point = BlockVariable::pack(Vector::Constant(1, w), c.problem.adversary.origin, Vector::Zero(1),
                                Vector::Zero(1), 0.0);
  return c;
}

/// Brute force over a polar grid for q = 2: angles span the feasible arc
/// around x0 (endpoints included), radii span [0, R] with R large enough to
/// reach the best attainable prediction. Returns the smallest adversary loss.
inline double polar_grid_min_loss(const Vector& w, const Vector& x0, double target, double delta,
                                  int radii = 400, int angles = 400) {
  const double base = std::atan2(x0[1], x0[0]);
  const double half = std::acos(std::clamp(delta, -1.0, 1.0));
  double best_alignment = 0.0;
  for (int a = 0; a < angles; ++a) {
    const double t = angles == 1 ? base : base - half + 2.0 * half * a / (angles - 1);
    // Only directions whose prediction has the target's sign can reach it.
    const double along = w[0] * std::cos(t) + w[1] * std::sin(t);
    best_alignment = std::max(best_alignment, target < 0.0 ? -along : along);
  }
  const double reach = best_alignment > 0.0 ? std::abs(target) / best_alignment : 0.0;
  const double r_max = 2.0 * (reach + x0.norm());
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < angles; ++a) {
    const double t = angles == 1 ? base : base - half + 2.0 * half * a / (angles - 1);
    const double c = std::cos(t), s = std::sin(t);
    // k = 0 stands for the limit r -> 0, which is not attained but bounds
    // the infimum.
    for (int k = 0; k <= radii; ++k) {
      const double r = r_max * k / radii;
      const double e = r * (w[0] * c + w[1] * s) - target;
      best = std::min(best, e * e);
    }
  }
  return best;
}

}  // namespace advreg::testing
