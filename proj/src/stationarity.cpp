#include "advreg/stationarity.hpp"

#include "advreg/calculus.hpp"

#include <algorithm>
#include <cmath>

namespace advreg {

namespace {

constexpr double kSqrtHalf = 0.70710678118654752440;

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

void check_point(const BlockVariable& v, const Problem& problem) {
  if (v.q() != problem.q() || v.m() != problem.m()) {
    throw ContractError("block variable dimensions do not match the problem");
  }
}

}  // namespace

void Problem::validate() const {
  static_set.validate();
  adversary.validate();
  cfg.validate();
  if (static_set.features() != adversary.features()) {
    throw ContractError("static and adversary data differ in feature count");
  }
}

BlockVariable::BlockVariable(std::size_t q, std::size_t m)
    : q_(q), m_(m), z_(Vector::Zero(idx(q + m * q))), xi_(Vector::Zero(idx(2 * m + 1))) {}

BlockVariable::BlockVariable(std::size_t q, std::size_t m, Vector z, Vector xi)
    : q_(q), m_(m), z_(std::move(z)), xi_(std::move(xi)) {
  if (z_.size() != idx(q + m * q) || xi_.size() != idx(2 * m + 1)) {
    throw ContractError("block variable lengths must be q + mq and 2m + 1");
  }
}

BlockVariable BlockVariable::pack(const Weights& w, const RowMatrix& X, const Vector& beta,
                                  const Vector& beta_hat, double lambda) {
  const auto q = static_cast<std::size_t>(w.size());
  const auto m = static_cast<std::size_t>(X.rows());
  if (X.cols() != w.size() || beta.size() != X.rows() || beta_hat.size() != X.rows()) {
    throw ContractError("BlockVariable::pack: inconsistent block sizes");
  }
  BlockVariable v(q, m);
  v.z_.head(w.size()) = w;
  v.z_.tail(X.size()) = Eigen::Map<const Vector>(X.data(), X.size());
  v.xi_.head(beta.size()) = beta;
  v.xi_.segment(beta.size(), beta_hat.size()) = beta_hat;
  v.xi_[v.xi_.size() - 1] = lambda;
  return v;
}

RowMatrix BlockVariable::X() const {
  return Eigen::Map<const RowMatrix>(z_.data() + q_, idx(m_), idx(q_));
}

Vector BlockVariable::stacked() const {
  Vector out(z_.size() + xi_.size());
  out << z_, xi_;
  return out;
}

BlockVariable BlockVariable::unstack(std::size_t q, std::size_t m, const Vector& v) {
  const Eigen::Index nz = idx(q + m * q);
  if (v.size() != nz + idx(2 * m + 1)) throw ContractError("stacked vector has the wrong length");
  return BlockVariable(q, m, v.head(nz), v.tail(v.size() - nz));
}

RowLayout RowLayout::of(std::size_t q, std::size_t m) {
  RowLayout l;
  const Eigen::Index Q = idx(q);
  const Eigen::Index MQ = idx(m * q);
  const Eigen::Index M = idx(m);
  l.grad_w = 0;
  l.upper_lagrangian = Q;
  l.lower_lagrangian = Q + MQ;
  l.fb_beta = Q + 2 * MQ;
  l.fb_beta_hat = l.fb_beta + M;
  l.fb_lambda = l.fb_beta_hat + M;
  l.rows = l.fb_lambda + 1;
  l.cols = Q + MQ + 2 * M + 1;
  return l;
}

double lagrangian_upper(const BlockVariable& v, const Problem& problem) {
  check_point(v, problem);
  const AdversaryBlock adv = problem.adversary.with_current(v.X());
  const Weights w = v.w();
  return upper_objective(w, adv, problem.static_set, problem.cfg) -
         v.lambda() * lower_objective(w, adv) -
         v.beta().dot(constraint_values(adv, problem.cfg.delta));
}

double lagrangian_lower(const BlockVariable& v, const Problem& problem) {
  check_point(v, problem);
  const AdversaryBlock adv = problem.adversary.with_current(v.X());
  return lower_objective(v.w(), adv) + v.beta_hat().dot(constraint_values(adv, problem.cfg.delta));
}

double fb(double a, double b) { return std::hypot(a, b) - (a + b); }

Eigen::Vector2d fb_gradient(double a, double b) {
  const double r = std::hypot(a, b);
  if (r == 0.0) return {kSqrtHalf - 1.0, kSqrtHalf - 1.0};
  return {a / r - 1.0, b / r - 1.0};
}

ResidualSystem assemble(const BlockVariable& v, const Problem& problem, bool with_jacobian) {
  check_point(v, problem);
  const std::size_t q = problem.q();
  const std::size_t m = problem.m();
  const Eigen::Index Q = idx(q);
  const Eigen::Index M = idx(m);
  const Eigen::Index MQ = idx(m * q);
  const RowLayout L = RowLayout::of(q, m);

  const Weights w = v.w();
  const AdversaryBlock adv = problem.adversary.with_current(v.X());
  const Vector beta = v.beta();
  const Vector beta_hat = v.beta_hat();
  const double lambda = v.lambda();

  const RowMatrix gF = grad_upper_X(w, adv);
  const RowMatrix gf = grad_lower_X(w, adv);
  const ConstraintJacobian G = grad_constraints_X(adv);
  const Vector g = constraint_values(adv, problem.cfg.delta);

  ResidualSystem sys;
  sys.layout = L;
  sys.phi.resize(L.rows);
  sys.phi.segment(L.grad_w, Q) = grad_upper_w(w, adv, problem.static_set, problem.cfg);

  RowMatrix upper = gF - lambda * gf;
  RowMatrix lower = gf;
  for (Eigen::Index i = 0; i < M; ++i) {
    upper.row(i) -= beta[i] * G.blocks.row(i);
    lower.row(i) += beta_hat[i] * G.blocks.row(i);
  }
  sys.phi.segment(L.upper_lagrangian, MQ) = Eigen::Map<const Vector>(upper.data(), MQ);
  sys.phi.segment(L.lower_lagrangian, MQ) = Eigen::Map<const Vector>(lower.data(), MQ);
  for (Eigen::Index i = 0; i < M; ++i) {
    sys.phi[L.fb_beta + i] = fb(beta[i], -g[i]);
    sys.phi[L.fb_beta_hat + i] = fb(beta_hat[i], -g[i]);
  }
  sys.phi[L.fb_lambda] = fb(lambda, 0.0);

  if (!with_jacobian) return sys;

  // Column offsets of the unknowns.
  const Eigen::Index cw = 0;
  const Eigen::Index cX = Q;
  const Eigen::Index cbeta = Q + MQ;
  const Eigen::Index cbeta_hat = cbeta + M;
  const Eigen::Index clambda = cbeta_hat + M;

  Matrix& J = sys.jacobian;
  J = Matrix::Zero(L.rows, L.cols);

  const Matrix cross_upper = cross_upper_wX(w, adv);  // q x mq
  const Matrix cross_lower = cross_lower_wX(w, adv);  // q x mq
  const std::vector<Matrix> Hg = hess_constraints_XX(adv);
  const Matrix ww = (2.0 / static_cast<double>(m)) * w * w.transpose();

  // grad_w F
  J.block(L.grad_w, cw, Q, Q) = hess_upper_ww(w, adv, problem.static_set, problem.cfg);
  J.block(L.grad_w, cX, Q, MQ) = cross_upper;

  // grad_X L = grad_X F - lambda grad_X f - dg^T beta
  J.block(L.upper_lagrangian, cw, MQ, Q) = (cross_upper - lambda * cross_lower).transpose();
  J.block(L.upper_lagrangian, clambda, MQ, 1) = -Eigen::Map<const Vector>(gf.data(), MQ);
  // grad_X l = grad_X f + dg^T beta_hat
  J.block(L.lower_lagrangian, cw, MQ, Q) = cross_lower.transpose();

  for (Eigen::Index i = 0; i < M; ++i) {
    const auto Gi = G.blocks.row(i).transpose();
    const Eigen::Index r_up = L.upper_lagrangian + i * Q;
    const Eigen::Index r_lo = L.lower_lagrangian + i * Q;
    const Eigen::Index c_row = cX + i * Q;
    const auto hg = Hg[static_cast<std::size_t>(i)];

    J.block(r_up, c_row, Q, Q) = (1.0 - lambda) * ww - beta[i] * hg;
    J.block(r_up, cbeta + i, Q, 1) = -Gi;
    J.block(r_lo, c_row, Q, Q) = ww + beta_hat[i] * hg;
    J.block(r_lo, cbeta_hat + i, Q, 1) = Gi;

    const Eigen::Vector2d db = fb_gradient(beta[i], -g[i]);
    J(L.fb_beta + i, cbeta + i) = db[0];
    J.block(L.fb_beta + i, c_row, 1, Q) = -db[1] * Gi.transpose();

    const Eigen::Vector2d dbh = fb_gradient(beta_hat[i], -g[i]);
    J(L.fb_beta_hat + i, cbeta_hat + i) = dbh[0];
    J.block(L.fb_beta_hat + i, c_row, 1, Q) = -dbh[1] * Gi.transpose();
  }
  J(L.fb_lambda, clambda) = fb_gradient(lambda, 0.0)[0];
  return sys;
}

Vector assemble_residual(const BlockVariable& v, const Problem& problem) {
  return assemble(v, problem, false).phi;
}

Matrix assemble_jacobian(const BlockVariable& v, const Problem& problem) {
  return assemble(v, problem, true).jacobian;
}

double StationarityReport::stationarity_inf() const {
  return std::max({grad_w_inf, upper_lagrangian_inf, lower_lagrangian_inf});
}

StationarityReport check_conditions(const BlockVariable& v, const Problem& problem) {
  const ResidualSystem sys = assemble(v, problem, false);
  const RowLayout& L = sys.layout;
  const Eigen::Index Q = idx(problem.q());
  const Eigen::Index MQ = idx(problem.m() * problem.q());
  const AdversaryBlock adv = problem.adversary.with_current(v.X());
  const Vector g = constraint_values(adv, problem.cfg.delta);
  const Vector beta = v.beta();
  const Vector beta_hat = v.beta_hat();

  StationarityReport r;
  r.grad_w_inf = sys.phi.segment(L.grad_w, Q).lpNorm<Eigen::Infinity>();
  r.upper_lagrangian_inf = sys.phi.segment(L.upper_lagrangian, MQ).lpNorm<Eigen::Infinity>();
  r.lower_lagrangian_inf = sys.phi.segment(L.lower_lagrangian, MQ).lpNorm<Eigen::Infinity>();
  r.max_constraint = g.maxCoeff();
  r.min_multiplier = std::min({beta.minCoeff(), beta_hat.minCoeff(), v.lambda()});
  r.max_complementarity = std::max((beta.array() * g.array()).abs().maxCoeff(),
                                   (beta_hat.array() * g.array()).abs().maxCoeff());
  return r;
}

}  // namespace advreg
