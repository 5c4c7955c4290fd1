#include <doctest.h>

#include <cmath>

#include "lowdim/delta_sigma.hpp"

using namespace lowdim;

namespace {

LevelsModel adapted_two_level() {
  // level 0: 4 singleton groups k=1 on {0..3}; level 1: 4 singleton groups k=2 on {4..7}
  LevelsModel m;
  m.ambient_dim = 8;
  GroupStructure g0;
  g0.ambient_dim = 8;
  g0.groups = {{0}, {1}, {2}, {3}};
  GroupStructure g1;
  g1.ambient_dim = 8;
  g1.groups = {{4}, {5}, {6}, {7}};
  m.levels.push_back({g0, 1});
  m.levels.push_back({g1, 2});
  m.validate();
  return m;
}

}  // namespace

TEST_CASE("delta_xz worked examples") {
  const LevelsModel p2 = LevelsModel::plain_sparse(2, 1);

  // orthogonal pair with positive radicand: value 0
  Vector x(2), z(2);
  x << 1.0, 0.0;
  z << 0.0, 1.0;
  CHECK(delta_xz(x, z, p2) == 0.0);

  // the quoted 1/sqrt(2) instance
  z << -1.0, 1.0;
  auto v = delta_xz(x, z, p2);
  REQUIRE(v.has_value());
  CHECK(*v == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));

  // joint positive scaling leaves the value unchanged
  for (double t : {0.1, 2.0, 35.0}) {
    auto vt = delta_xz(t * x, t * z, p2);
    REQUIRE(vt.has_value());
    CHECK(*vt == doctest::Approx(*v).epsilon(1e-10));
  }

  // degenerate radicand with positive numerator: undefined flag
  CHECK_FALSE(delta_xz(x, Vector(-1e-8 * x), p2).has_value());

  // preconditions
  CHECK_THROWS_AS(delta_xz(Vector::Zero(2), z, p2), std::invalid_argument);
  Vector notin(2);
  notin << 1.0, 1.0;
  CHECK_THROWS_AS(delta_xz(notin, z, p2), std::invalid_argument);
}

TEST_CASE("sample_descent contract") {
  const LevelsModel m = adapted_two_level();
  const Regularizer f = Regularizer::adapted(m);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const DescentSample s = sample_descent(f, m, seed);
    CHECK(is_member(s.witness_x, m));
    CHECK(s.z.norm() > 0.0);
    CHECK(eval_f(f, s.witness_x + s.z) <= eval_f(f, s.witness_x) * (1.0 + 1e-12));
  }
  const DescentSample a = sample_descent(f, m, 5);
  const DescentSample b = sample_descent(f, m, 5);
  CHECK((a.z - b.z).norm() == 0.0);
}

TEST_CASE("split_best_support") {
  const LevelsModel p2 = LevelsModel::plain_sparse(2, 1);
  Vector z(2);
  z << 3.0, -1.0;
  const SupportSplit s = split_best_support(z, p2);
  CHECK(s.z_T[0] == 3.0);
  CHECK(s.z_T[1] == 0.0);
  CHECK(s.z_Tc[0] == 0.0);
  CHECK(s.z_Tc[1] == -1.0);
  CHECK((s.z_T + s.z_Tc - z).norm() == 0.0);

  // member vectors split with zero tail
  const LevelsModel m = adapted_two_level();
  Rng rng(3);
  const Vector inside = sample_model(m, rng);
  CHECK(split_best_support(inside, m).z_Tc.norm() == 0.0);

  // exhaustive check: T maximizes the kept mass over admissible supports
  const auto supports = enumerate_maximal_supports(m, 1000);
  for (int t = 0; t < 40; ++t) {
    Vector v(8);
    for (int i = 0; i < 8; ++i) v[i] = rng.normal();
    const SupportSplit sp = split_best_support(v, m);
    double best = 0.0;
    for (const auto& sup : supports) {
      double mass = 0.0;
      for (int i : sup) mass += v[i] * v[i];
      best = std::max(best, mass);
    }
    CHECK(sp.z_T.squaredNorm() == doctest::Approx(best).epsilon(1e-12));
    CHECK(is_member(sp.z_T, m));
  }
}

TEST_CASE("delta_heuristic worked examples and consistency") {
  const LevelsModel p2 = LevelsModel::plain_sparse(2, 1);
  Vector z(2);
  z << 1.0, 0.0;  // in the model: z_Tc = 0 -> value 1
  CHECK(delta_heuristic(z, p2) == doctest::Approx(1.0).epsilon(1e-12));

  z << 1.0, -1.0;
  CHECK(delta_heuristic(z, p2) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));

  CHECK_THROWS_AS(delta_heuristic(Vector::Zero(2), p2), std::invalid_argument);

  // delta_heuristic(z) = delta_xz(-z_T, z) on random vectors
  const LevelsModel m = adapted_two_level();
  SigmaNormOpts tight;
  tight.gap_tol = 1e-12;
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    Vector v(8);
    for (int i = 0; i < 8; ++i) v[i] = rng.normal();
    const SupportSplit sp = split_best_support(v, m);
    const double h = delta_heuristic(v, m, tight);
    const auto direct = delta_xz(Vector(-sp.z_T), v, m, tight);
    REQUIRE(direct.has_value());
    CHECK(h == doctest::Approx(*direct).epsilon(1e-8));
  }
}

TEST_CASE("delta_sigma_lower_bound closed forms") {
  CHECK(delta_sigma_lower_bound(LevelsModel::plain_sparse(6, 2), {1.0}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

  const LevelsModel m = adapted_two_level();
  // adapted weights: kappa = 1, bound 1/sqrt(2+J) = 0.5
  CHECK(delta_sigma_lower_bound(m, {1.0, 1.0 / std::sqrt(2.0)}) ==
        doctest::Approx(0.5).epsilon(1e-12));

  // J=2, k=(1,4), unit weights: kappa = 2, bound 1/sqrt(10)
  LevelsModel k14;
  k14.ambient_dim = 8;
  GroupStructure a;
  a.ambient_dim = 8;
  a.groups = {{0}, {1}, {2}, {3}};
  GroupStructure b;
  b.ambient_dim = 8;
  b.groups = {{4}, {5}, {6}, {7}};
  k14.levels.push_back({a, 1});
  k14.levels.push_back({b, 4});
  k14.validate();
  CHECK(delta_sigma_lower_bound(k14, {1.0, 1.0}) ==
        doctest::Approx(1.0 / std::sqrt(10.0)).epsilon(1e-12));
}

TEST_CASE("delta_sigma_empirical honors the per-sample bound") {
  DeltaSigmaOpts opts;
  opts.sigma.gap_tol = 1e-12;
  opts.candidate_supports = 2;

  SUBCASE("J=1 plain sparse") {
    const LevelsModel m = LevelsModel::plain_sparse(8, 2);
    const Regularizer f = Regularizer::adapted(m);
    const DeltaReport rep = delta_sigma_empirical(f, m, 40, 17, opts, 2);
    CHECK(rep.adapted_weights);
    CHECK(rep.violations.empty());
    CHECK(rep.empirical_min >= 1.0 / std::sqrt(2.0) - 1e-9);
    CHECK(rep.empirical_min <= 1.0 + 1e-12);
    for (double h : rep.heuristic_values) CHECK(h >= 1.0 / std::sqrt(2.0) - 1e-9);
    for (std::size_t i = 0; i < rep.sup_values.size(); ++i)
      CHECK(rep.sup_values[i] >= rep.heuristic_values[i] - 1e-12);
  }

  SUBCASE("J=2 adapted weights") {
    const LevelsModel m = adapted_two_level();
    const Regularizer f = Regularizer::adapted(m);
    const DeltaReport rep = delta_sigma_empirical(f, m, 40, 23, opts, 2);
    CHECK(rep.adapted_weights);
    CHECK(rep.lower_bound_closed_form == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.violations.empty());
    CHECK(rep.empirical_min >= 0.5 - 1e-9);
  }

  SUBCASE("non-adapted weights disable the per-sample assertion") {
    const LevelsModel m = adapted_two_level();
    const Regularizer f = Regularizer::group_levels(m, {1.0, 1.0});
    const DeltaReport rep = delta_sigma_empirical(f, m, 10, 29, opts, 1);
    CHECK_FALSE(rep.adapted_weights);
    CHECK(rep.violations.empty());  // never asserted in this regime
  }
}

TEST_CASE("delta report JSON shape") {
  const LevelsModel m = LevelsModel::plain_sparse(6, 1);
  const Regularizer f = Regularizer::adapted(m);
  DeltaSigmaOpts opts;
  opts.sigma.gap_tol = 1e-12;
  const DeltaReport rep = delta_sigma_empirical(f, m, 5, 31, opts, 1);
  const std::string json = delta_report_to_json(rep);
  CHECK(json.find("\"lower_bound\"") != std::string::npos);
  CHECK(json.find("\"empirical_min\"") != std::string::npos);
  CHECK(json.find("\"violations\":[]") != std::string::npos);
}
