#include "advreg/attack.hpp"
#include "support.hpp"

#include "doctest.h"

using namespace advreg;
using advreg::testing::random_matrix;
using advreg::testing::random_vector;

namespace {

double loss(const Vector& w, const Vector& x, double z) { return (w.dot(x) - z) * (w.dot(x) - z); }

Dataset random_test_set(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  return Dataset{random_matrix(rng, rows, cols, 0, 1), random_vector(rng, rows, 0, 1)};
}

}  // namespace

TEST_CASE("delta = 1 restricts the attack to the ray through x0") {
  Vector w(2), x0(2);
  w << 1, 1;
  x0 << 1, 1;
  const Vector x = attack_instance(w, x0, 4.0, 1.0);
  CHECK(x[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(x[1] == doctest::Approx(2.0).epsilon(1e-9));

  // Against the one-dimensional oracle alpha* = z / (w.x0).
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const Vector wr = random_vector(rng, 3, 0.1, 1), xr = random_vector(rng, 3, 0.1, 1);
    const double z = rng.uniform(0.1, 2.0);
    const Vector expected = (z / wr.dot(xr)) * xr;
    CHECK((attack_instance(wr, xr, z, 1.0) - expected).norm() < 1e-8);
  }
}

TEST_CASE("no move when the target is already met") {
  Rng rng(2);
  const Vector w = random_vector(rng, 4, -1, 1), x0 = random_vector(rng, 4, 0.1, 1);
  const Vector x = attack_instance(w, x0, w.dot(x0), 0.9);
  CHECK((x - x0).norm() == 0.0);
}

TEST_CASE("polar grid oracle for q = 2") {
  Rng rng(3);
  for (int k = 0; k < 10; ++k) {
    const Vector w = random_vector(rng, 2, -1, 1), x0 = random_vector(rng, 2, 0.1, 1);
    const double z = w.dot(x0) + rng.uniform(-1, 1);
    const Vector x = attack_instance(w, x0, z, 0.9);
    const double oracle = advreg::testing::polar_grid_min_loss(w, x0, z, 0.9);
    CHECK(std::abs(loss(w, x, z) - oracle) <= 1e-3);
  }
}

TEST_CASE("attacks are feasible and never worse than x0") {
  Rng rng(4);
  for (int k = 0; k < 100; ++k) {
    const auto q = static_cast<Eigen::Index>(1 + rng.index(6));
    const Vector w = random_vector(rng, q, -1, 1), x0 = random_vector(rng, q, -1, 1);
    const double z = rng.uniform(-2, 2);
    const double delta = rng.uniform(0.8, 1.0);
    const Vector x = attack_instance(w, x0, z, delta, AttackOptions{static_cast<std::uint64_t>(k)});
    CHECK(cosine_similarity(x, x0) >= delta - 1e-8);
    CHECK(loss(w, x, z) <= loss(w, x0, z));
  }
}

TEST_CASE("zero-norm origin is a domain error") {
  CHECK_THROWS_AS(attack_instance(Vector::Ones(2), Vector::Zero(2), 1.0, 0.9), DomainError);
  CHECK_THROWS_AS(attack_instance(Vector::Ones(2), Vector::Ones(2), 1.0, 1.5), ContractError);
}

TEST_CASE("projection onto the cone") {
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    const Vector x = random_vector(rng, 3, -1, 1), x0 = random_vector(rng, 3, -1, 1);
    const Vector p = project_to_cone(x, x0, 0.9);
    CHECK(cosine_similarity(p, x0) >= 0.9 - 1e-12);
    CHECK(p.norm() == doctest::Approx(x.norm()).epsilon(1e-12));
  }
  Vector x0(2), inside(2);
  x0 << 1, 0;
  inside << 1, 0.1;
  CHECK(project_to_cone(inside, x0, 0.9) == inside);
}

TEST_CASE("attack spec") {
  Rng rng(6);
  const Dataset test = random_test_set(rng, 25, 3);
  const AttackSpec spec = make_attack_spec(test, 0.1, 42);
  CHECK(spec.indices.size() == 3);  // 2.5 rounds up
  CHECK(std::is_sorted(spec.indices.begin(), spec.indices.end()));
  CHECK(std::adjacent_find(spec.indices.begin(), spec.indices.end()) == spec.indices.end());
  CHECK(spec.delta_perturbation == doctest::Approx(2 * standard_deviation(test.labels)));
  for (std::size_t k = 0; k < spec.indices.size(); ++k) {
    const auto e = static_cast<Eigen::Index>(k);
    CHECK(spec.thresholds[e] > 0.8);
    CHECK(spec.thresholds[e] < 1.0);
    CHECK(spec.targets[e] == doctest::Approx(test.labels[static_cast<Eigen::Index>(spec.indices[k])] + spec.delta_perturbation));
  }
  spec.validate(test.size());
  const AttackSpec again = make_attack_spec(test, 0.1, 42);
  CHECK(again.indices == spec.indices);
  CHECK(again.thresholds == spec.thresholds);
  CHECK_THROWS_AS(make_attack_spec(test, 0.0, 1), ContractError);
  CHECK_THROWS_AS(make_attack_spec(test, 1.5, 1), ContractError);

  Dataset with_zero = test;
  for (Eigen::Index i = 0; i < 20; ++i) with_zero.rows.row(i).setZero();
  const AttackSpec all = make_attack_spec(with_zero, 1.0, 7);
  CHECK(all.indices.size() == 5);
  for (auto i : all.indices) CHECK(i >= 20);
}

TEST_CASE("attacked test set") {
  Rng rng(7);
  const Dataset test = random_test_set(rng, 40, 4);
  const Vector w = random_vector(rng, 4, -1, 1);

  SUBCASE("empty attack leaves the data untouched") {
    const AttackSpec none = make_attack_spec(test, 0.01, 3);
    REQUIRE(none.indices.empty());
    const AttackedTestSet out = build_attacked_testset(test, w, none);
    CHECK(out.data.rows == test.rows);
    CHECK(out.data.labels == test.labels);
    CHECK(out.records.empty());
  }
  SUBCASE("thresholds, losses, labels and untouched rows") {
    const AttackSpec spec = make_attack_spec(test, 0.25, 11);
    const AttackedTestSet out = build_attacked_testset(test, w, spec);
    REQUIRE(out.records.size() == spec.indices.size());
    CHECK(out.data.labels == test.labels);
    for (std::size_t k = 0; k < spec.indices.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(spec.indices[k]);
      const Vector x = out.data.rows.row(i).transpose(), x0 = test.rows.row(i).transpose();
      const double z = spec.targets[static_cast<Eigen::Index>(k)];
      CHECK(cosine_similarity(x, x0) >= spec.thresholds[static_cast<Eigen::Index>(k)] - 1e-8);
      CHECK(loss(w, x, z) <= loss(w, x0, z));
      CHECK(out.records[k].index == spec.indices[k]);
      CHECK(out.records[k].similarity == doctest::Approx(cosine_similarity(x, x0)));
      CHECK(out.records[k].loss_after <= out.records[k].loss_before);
    }
    for (Eigen::Index i = 0; i < test.rows.rows(); ++i) {
      if (std::find(spec.indices.begin(), spec.indices.end(), static_cast<std::size_t>(i)) != spec.indices.end()) continue;
      CHECK((out.data.rows.row(i).array() == test.rows.row(i).array()).all());
    }
  }
  SUBCASE("bit-for-bit reproducible") {
    const AttackSpec spec = make_attack_spec(test, 0.2, 5);
    const AttackedTestSet a = build_attacked_testset(test, w, spec);
    const AttackedTestSet b = build_attacked_testset(test, w, spec);
    CHECK(std::memcmp(a.data.rows.data(), b.data.rows.data(), sizeof(double) * static_cast<std::size_t>(a.data.rows.size())) == 0);
  }
}
