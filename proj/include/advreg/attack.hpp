#pragma once

// Test-time evasion attacks: each attacked row is moved toward a target
// prediction while keeping its cosine similarity to the original row above
// a per-row threshold.

#include "advreg/model.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace advreg {

struct AttackSpec {
  std::vector<std::size_t> indices;  // attacked rows, ascending
  Vector targets;                    // one per index: label + delta_perturbation
  Vector thresholds;                 // one per index, in (0.8, 1)
  double attacked_fraction = 0.10;
  double delta_perturbation = 0.0;
  std::uint64_t seed = 0;

  void validate(std::size_t test_rows) const;
};

struct AttackOptions {
  std::uint64_t seed = 0;
  /// Random restarts besides x0 itself.
  int perturbed_starts = 4;
  int outer_iterations = 30;
  int inner_iterations = 100;
};

struct AttackRecord {
  std::size_t index = 0;
  double threshold = 0.0;
  double target = 0.0;
  double similarity = 0.0;
  double loss_before = 0.0;
  double loss_after = 0.0;
};

struct AttackedTestSet {
  Dataset data;
  std::vector<AttackRecord> records;
};

/// Draws round(fraction * rows) distinct rows, targets label + 2 std(labels)
/// and thresholds uniform on (0.8, 1). Zero-norm rows are never drawn since
/// their cosine similarity is undefined.
AttackSpec make_attack_spec(const Dataset& test, double attacked_fraction, std::uint64_t seed);

/// argmin_x (w.x - target)^2 subject to cos(x, x0) >= delta.
///
/// Candidates: x0; the direction in span(x0, w) rotated from x0 toward the
/// target side of w as far as the threshold allows; augmented-Lagrangian
/// gradient runs from x0 and seeded perturbations of it. Each candidate is
/// projected onto the feasible cone and rescaled along its ray, or shrunk
/// toward zero when the ray predicts the wrong sign. The lowest loss wins,
/// ties going to the candidate closest to x0.
Vector attack_instance(const Weights& w, const Eigen::Ref<const Vector>& x0, double target,
                       double delta, const AttackOptions& options = {});

/// Replaces the rows named in `spec` with attacks against `w_reference`.
/// Labels are left untouched.
AttackedTestSet build_attacked_testset(const Dataset& test, const Weights& w_reference,
                                       const AttackSpec& spec);

/// Radial projection of x onto {y : cos(y, x0) >= delta}, keeping |x|.
Vector project_to_cone(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& x0,
                       double delta);

}  // namespace advreg
