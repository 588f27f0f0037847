#include "advreg/attack.hpp"

#include "advreg/calculus.hpp"
#include "advreg/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace advreg {

namespace {

// Unit vector at angle min(angle(u, t), max_angle) from unit vector u toward
// direction t, inside span(u, t).
Vector rotate_toward(const Vector& u, const Vector& t, double max_angle) {
  const double tn = t.norm();
  if (tn == 0.0) return u;
  const Vector t_hat = t / tn;
  const double c = std::clamp(u.dot(t_hat), -1.0, 1.0);
  if (std::acos(c) <= max_angle) return t_hat;
  Vector v = t_hat - c * u;
  double vn = v.norm();
  if (vn < 1e-12) {
    // t is anti-parallel to u; any orthogonal direction is as good.
    if (u.size() < 2) return u;
    Eigen::Index k = 0;
    u.cwiseAbs().minCoeff(&k);
    v = -u[k] * u;
    v[k] += 1.0;
    vn = v.norm();
  }
  v /= vn;
  return std::cos(max_angle) * u + std::sin(max_angle) * v;
}

double threshold_angle(double delta) { return std::acos(std::clamp(delta, -1.0, 1.0)); }

double loss_at(const Weights& w, const Vector& x, double target) {
  return adversary_loss(w.dot(x), target);
}

// Best point on the ray {a x, a > 0}; the cone is scale invariant so
// feasibility is preserved. When the prediction has the wrong sign the loss
// only approaches target^2 as a -> 0, so the row is shrunk until the
// prediction is negligible next to the target.
Vector along_ray(const Weights& w, const Vector& x, double target) {
  const double s = w.dot(x);
  if (s * target > 0.0) return x * (target / s);
  if (s * target < 0.0) return x * std::min(1.0, 1e-6 * std::abs(target / s));
  return x;
}

bool feasible(const Vector& x, const Vector& x0, double delta) {
  const double nx = x.norm();
  return nx > 0.0 && x.dot(x0) / (nx * x0.norm()) >= delta;
}

// Augmented Lagrangian for the single constraint g = delta - cos(x, x0) <= 0
// with gradient-descent inner solves.
Vector augmented_lagrangian(const Weights& w, const Vector& x0, double target, double delta,
                            Vector x, const AttackOptions& options) {
  double mu = 10.0;
  double multiplier = 0.0;
  double last_violation = std::numeric_limits<double>::infinity();
  auto penalty_value = [&](const Vector& y, double& g) {
    g = delta - y.dot(x0) / (y.norm() * x0.norm());
    const double shifted = std::max(0.0, g + multiplier / mu);
    return loss_at(w, y, target) + 0.5 * mu * shifted * shifted;
  };
  for (int outer = 0; outer < options.outer_iterations; ++outer) {
    double step = 1.0;
    for (int inner = 0; inner < options.inner_iterations; ++inner) {
      double g = 0.0;
      const double value = penalty_value(x, g);
      const double shifted = std::max(0.0, g + multiplier / mu);
      Vector grad = 2.0 * (w.dot(x) - target) * w;
      if (shifted > 0.0) grad += mu * shifted * constraint_row_gradient(x, x0);
      const double gnorm2 = grad.squaredNorm();
      if (gnorm2 < 1e-24) break;
      step = std::min(1e3, step * 2.0);
      bool moved = false;
      for (int b = 0; b < 50; ++b) {
        const Vector trial = x - step * grad;
        if (trial.norm() > 0.0) {
          double gt = 0.0;
          if (penalty_value(trial, gt) <= value - 1e-4 * step * gnorm2) {
            x = trial;
            moved = true;
            break;
          }
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    const double g = delta - x.dot(x0) / (x.norm() * x0.norm());
    multiplier = std::max(0.0, multiplier + mu * g);
    const double violation = std::max(0.0, g);
    if (violation <= 1e-12) {
      if (outer > 0 && multiplier == 0.0) break;
    } else if (violation > 0.25 * last_violation) {
      mu = std::min(1e8, mu * 10.0);
    }
    last_violation = violation;
  }
  return x;
}

}  // namespace

void AttackSpec::validate(std::size_t test_rows) const {
  if (!(attacked_fraction > 0.0 && attacked_fraction <= 1.0)) {
    throw ContractError("attacked fraction must lie in (0, 1]");
  }
  if (targets.size() != static_cast<Eigen::Index>(indices.size()) ||
      thresholds.size() != static_cast<Eigen::Index>(indices.size())) {
    throw ContractError("attack spec needs one target and one threshold per index");
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= test_rows) throw ContractError("attack index out of range");
    if (k > 0 && indices[k] <= indices[k - 1]) {
      throw ContractError("attack indices must be distinct and ascending");
    }
  }
  for (Eigen::Index k = 0; k < thresholds.size(); ++k) {
    if (!(thresholds[k] > 0.8 && thresholds[k] < 1.0)) {
      throw ContractError("attack thresholds must lie in (0.8, 1)");
    }
  }
}

AttackSpec make_attack_spec(const Dataset& test, double attacked_fraction, std::uint64_t seed) {
  test.validate();
  AttackSpec spec;
  spec.attacked_fraction = attacked_fraction;
  spec.seed = seed;
  if (!(attacked_fraction > 0.0 && attacked_fraction <= 1.0)) {
    throw ContractError("attacked fraction must lie in (0, 1]");
  }
  spec.delta_perturbation = 2.0 * standard_deviation(test.labels);

  std::vector<std::size_t> pool;
  for (Eigen::Index i = 0; i < test.rows.rows(); ++i) {
    if (test.rows.row(i).squaredNorm() > 0.0) pool.push_back(static_cast<std::size_t>(i));
  }
  const auto wanted = static_cast<std::size_t>(
      std::floor(attacked_fraction * static_cast<double>(test.size()) + 0.5));
  const std::size_t count = std::min(wanted, pool.size());

  Rng rng(seed);
  std::vector<std::size_t> picked = rng.sample(pool.size(), count);
  for (auto& p : picked) p = pool[p];
  std::sort(picked.begin(), picked.end());
  spec.indices = std::move(picked);

  spec.targets.resize(static_cast<Eigen::Index>(count));
  spec.thresholds.resize(static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    const auto e = static_cast<Eigen::Index>(k);
    spec.targets[e] = test.labels[static_cast<Eigen::Index>(spec.indices[k])] + spec.delta_perturbation;
    spec.thresholds[e] = rng.uniform_open(0.8, 1.0);
  }
  return spec;
}

Vector project_to_cone(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x0,
                       double delta) {
  const double n0 = x0.norm();
  if (n0 == 0.0) throw DomainError("projection onto the cone of a zero-norm origin");
  const double nx = x.norm();
  if (nx == 0.0) return x0;
  if (x.dot(x0) / (nx * n0) >= delta) return x;
  return nx * rotate_toward(x0 / n0, x, threshold_angle(delta));
}

Vector attack_instance(const Weights& w, const Eigen::Ref<const Vector>& x0_ref, double target,
                       double delta, const AttackOptions& options) {
  const Vector x0 = x0_ref;
  if (w.size() != x0.size()) throw ContractError("attack_instance: length mismatch");
  const double n0 = x0.norm();
  if (n0 == 0.0) throw DomainError("attack_instance: zero-norm start row");
  if (!(delta > -1.0 && delta <= 1.0)) throw ContractError("attack threshold must lie in (-1, 1]");

  std::vector<Vector> candidates;
  candidates.push_back(along_ray(w, x0, target));

  const Vector u = x0 / n0;
  if (target != 0.0) {
    const Vector toward = (target > 0.0 ? 1.0 : -1.0) * w;
    candidates.push_back(along_ray(w, n0 * rotate_toward(u, toward, threshold_angle(delta)), target));
  }

  Rng rng(options.seed);
  for (int s = 0; s <= options.perturbed_starts; ++s) {
    Vector start = x0;
    if (s > 0) {
      for (Eigen::Index k = 0; k < start.size(); ++k) start[k] += 0.1 * n0 * rng.normal();
      start = project_to_cone(start, x0, delta);
    }
    const Vector result = augmented_lagrangian(w, x0, target, delta, start, options);
    candidates.push_back(along_ray(w, project_to_cone(result, x0, delta), target));
  }

  const double start_loss = loss_at(w, x0, target);
  Vector best = x0;
  double best_loss = start_loss;
  double best_move = 0.0;
  for (const auto& c : candidates) {
    if (!c.allFinite() || !feasible(c, x0, delta - 1e-12)) continue;
    const double l = loss_at(w, c, target);
    const double move = (c - x0).norm();
    const double tie = 1e-12 * (1.0 + best_loss);
    if (l < best_loss - tie || (std::abs(l - best_loss) <= tie && move < best_move)) {
      best = c;
      best_loss = l;
      best_move = move;
    }
  }
  return best;
}

AttackedTestSet build_attacked_testset(const Dataset& test, const Weights& w_reference,
                                       const AttackSpec& spec) {
  test.validate();
  spec.validate(test.size());
  if (w_reference.size() != test.rows.cols()) {
    throw ContractError("reference weights do not match the test features");
  }
  AttackedTestSet out;
  out.data = test;
  out.records.reserve(spec.indices.size());
  for (std::size_t k = 0; k < spec.indices.size(); ++k) {
    const auto e = static_cast<Eigen::Index>(k);
    const auto row = static_cast<Eigen::Index>(spec.indices[k]);
    const Vector x0 = test.rows.row(row).transpose();
    AttackOptions opts;
    opts.seed = derive_seed(spec.seed, spec.indices[k]);
    const Vector x = attack_instance(w_reference, x0, spec.targets[e], spec.thresholds[e], opts);
    out.data.rows.row(row) = x.transpose();

    AttackRecord rec;
    rec.index = spec.indices[k];
    rec.threshold = spec.thresholds[e];
    rec.target = spec.targets[e];
    rec.similarity = cosine_similarity(x, x0);
    rec.loss_before = adversary_loss(w_reference.dot(x0), spec.targets[e]);
    rec.loss_after = adversary_loss(w_reference.dot(x), spec.targets[e]);
    out.records.push_back(rec);
  }
  return out;
}

}  // namespace advreg
