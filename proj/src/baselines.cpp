#include "advreg/baselines.hpp"

#include <cmath>

namespace advreg {

std::string to_string(BaselineKind kind) { return kind == BaselineKind::LinReg ? "LinReg" : "B&S"; }

Weights fit_linreg(const Dataset& train, std::optional<double> ridge) {
  train.validate();
  if (ridge && !(*ridge > 0.0)) throw ContractError("ridge weight must be > 0");
  const double n = static_cast<double>(train.size());
  Matrix gram = train.rows.transpose() * train.rows / n;
  const Vector rhs = train.rows.transpose() * train.labels / n;
  if (ridge) gram.diagonal().array() += 1.0 / *ridge;

  Eigen::LDLT<Matrix> ldlt(gram);
  const double max_pivot = ldlt.vectorD().cwiseAbs().maxCoeff();
  const double min_pivot = ldlt.vectorD().cwiseAbs().minCoeff();
  if (ldlt.info() != Eigen::Success || !(min_pivot > 1e-13 * std::max(1.0, max_pivot))) {
    throw SolverError("fit_linreg: normal equations are singular; enable the ridge term");
  }
  return ldlt.solve(rhs);
}

Vector bs_best_response(const Weights& w, const Eigen::Ref<const Vector>& x0, double target,
                        double proximal) {
  if (!(proximal > 0.0)) throw ContractError("proximal weight must be > 0");
  if (w.size() != x0.size()) throw ContractError("bs_best_response: length mismatch");
  // Stationarity 2w(w.x - z) + rho (x - x0) = 0 gives, with s = w.x,
  // s = (rho w.x0 + 2 z |w|^2) / (rho + 2 |w|^2) and x = x0 + (2/rho)(z - s) w.
  const double ww = w.squaredNorm();
  const double s = (proximal * w.dot(x0) + 2.0 * target * ww) / (proximal + 2.0 * ww);
  return x0 + (2.0 / proximal) * (target - s) * w;
}

namespace {

// Prediction of the best response, s_i(w), and its gradient in w.
double response_prediction(const Weights& w, const Eigen::Ref<const Vector>& x0, double z,
                           double rho, Vector* grad) {
  const double ww = w.squaredNorm();
  const double num = rho * w.dot(x0) + 2.0 * z * ww;
  const double den = rho + 2.0 * ww;
  if (grad) *grad = (rho * x0 + 4.0 * z * w) / den - (4.0 * num / (den * den)) * w;
  return num / den;
}

}  // namespace

double bs_objective(const Weights& w, const Dataset& static_set, const AdversaryBlock& adversary,
                    const ModelConfig& cfg, double proximal) {
  const double n = static_cast<double>(static_set.size());
  const double m = static_cast<double>(adversary.size());
  double value = (static_set.rows * w - static_set.labels).squaredNorm() / n;
  double adv = 0.0;
  for (Eigen::Index i = 0; i < adversary.origin.rows(); ++i) {
    const double s = response_prediction(w, adversary.origin.row(i).transpose(),
                                         adversary.target_labels[i], proximal, nullptr);
    adv += learner_loss(s, adversary.true_labels[i]);
  }
  return value + adv / m + cfg.ridge_coefficient() * w.squaredNorm();
}

Vector bs_gradient(const Weights& w, const Dataset& static_set, const AdversaryBlock& adversary,
                   const ModelConfig& cfg, double proximal) {
  const double n = static_cast<double>(static_set.size());
  const double m = static_cast<double>(adversary.size());
  Vector grad = (2.0 / n) * static_set.rows.transpose() * (static_set.rows * w - static_set.labels);
  Vector ds;
  for (Eigen::Index i = 0; i < adversary.origin.rows(); ++i) {
    const double s = response_prediction(w, adversary.origin.row(i).transpose(),
                                         adversary.target_labels[i], proximal, &ds);
    grad += (2.0 / m) * (s - adversary.true_labels[i]) * ds;
  }
  return grad + 2.0 * cfg.ridge_coefficient() * w;
}

Dataset combined_training_rows(const Dataset& static_set, const AdversaryBlock& adversary) {
  Dataset out;
  out.rows.resize(static_set.rows.rows() + adversary.origin.rows(), static_set.rows.cols());
  out.rows << static_set.rows, adversary.origin;
  out.labels.resize(out.rows.rows());
  out.labels << static_set.labels, adversary.true_labels;
  return out;
}

BaselineModel fit_bs(const Dataset& static_set, const AdversaryBlock& adversary,
                     const ModelConfig& cfg, const BsConfig& bs) {
  if (adversary.size() < 1) throw ContractError("fit_bs needs at least one adversary row");
  if (!(bs.proximal > 0.0)) throw ContractError("proximal weight must be > 0");

  BaselineModel model;
  model.kind = BaselineKind::BS;
  model.ridge = cfg.ridge;
  model.proximal = bs.proximal;

  Weights w = fit_linreg(combined_training_rows(static_set, adversary), cfg.ridge);
  auto objective = [&](const Weights& v) {
    return bs_objective(v, static_set, adversary, cfg, bs.proximal);
  };
  double value = objective(w);
  model.converged = false;
  double step = 1.0;
  int it = 0;
  for (; it < bs.max_iter; ++it) {
    const Vector grad = bs_gradient(w, static_set, adversary, cfg, bs.proximal);
    const double gnorm2 = grad.squaredNorm();
    if (std::sqrt(gnorm2) <= bs.gradient_tol) {
      model.converged = true;
      break;
    }
    // Armijo backtracking from a step that grows again after successes.
    step = std::min(1e6, step * 2.0);
    bool accepted = false;
    for (int k = 0; k < 80; ++k) {
      const Weights trial = w - step * grad;
      const double tv = objective(trial);
      if (tv <= value - 1e-4 * step * gnorm2) {
        w = trial;
        value = tv;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  model.iterations = it;
  model.weights = w;
  return model;
}

}  // namespace advreg
