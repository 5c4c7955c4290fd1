#include <doctest.h>

#include <cmath>

#include "lowdim/secant.hpp"

using namespace lowdim;

namespace {

std::vector<Vector> circle_cloud(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> cloud;
  for (int i = 0; i < count; ++i) {
    const double theta = 2.0 * M_PI * rng.uniform();
    Vector z(2);
    z << std::cos(theta), std::sin(theta);
    cloud.push_back(z);
  }
  return cloud;
}

}  // namespace

TEST_CASE("greedy cover small cases") {
  Vector e1 = Vector::Zero(3);
  e1[0] = 1.0;

  // one repeated sample: a single center at any radius
  std::vector<Vector> rep(5, e1);
  CHECK(greedy_cover(rep, 0.01).centers.size() == 1);

  // antipodal unit vectors at alpha = 0.5: distance 2 needs 2 centers
  std::vector<Vector> anti = {e1, -e1};
  CHECK(greedy_cover(anti, 0.5).centers.size() == 2);
  CHECK(greedy_cover(anti, 2.0).centers.size() == 1);

  CHECK_THROWS_AS(greedy_cover(anti, 0.0), std::invalid_argument);
}

TEST_CASE("greedy cover of the unit circle is within a factor 2 of optimal") {
  const auto cloud = circle_cloud(1000, 31);
  const CoverResult cover = greedy_cover(cloud, 0.1);
  // optimal cover of the circle needs about pi/alpha = 31 balls
  CHECK(cover.centers.size() >= 15);
  CHECK(cover.centers.size() <= 126);
}

TEST_CASE("cover feasibility and count monotonicity") {
  const auto cloud = circle_cloud(400, 77);
  const double alphas[] = {0.5, 0.3, 0.2, 0.1};
  std::size_t prev = 0;
  for (double a : alphas) {
    const CoverResult cover = greedy_cover(cloud, a);
    // every sample within alpha of some center, exact assertion
    for (const Vector& z : cloud) {
      double best = 1e300;
      for (const Vector& c : cover.centers) best = std::min(best, (z - c).norm());
      CHECK(best <= a);
    }
    CHECK(cover.centers.size() >= prev);
    prev = cover.centers.size();
  }
}

TEST_CASE("boxdim of a single point is zero with a degenerate-fit flag") {
  Vector p(3);
  p << 1.0, 0.0, 0.0;
  SecantSampler fixed = [p]() { return p; };
  const BoxDimEstimate est = estimate_boxdim(fixed, {0.4, 0.2, 0.1, 0.05}, 200);
  CHECK(est.status == BoxDimEstimate::Status::DegenerateFit);
  CHECK(std::abs(est.slope) <= 0.05);
}

TEST_CASE("boxdim of the unit circle is near 1") {
  const auto cloud = circle_cloud(1500, 5);
  const BoxDimEstimate est =
      estimate_boxdim_cloud(cloud, {0.5, 0.35, 0.25, 0.18, 0.12, 0.08});
  CHECK(est.slope >= 0.75);
  CHECK(est.slope <= 1.25);
  // analytic oracle: N(alpha) ~ pi/alpha, so counts should bracket it loosely
  for (std::size_t i = 0; i < est.alphas.size(); ++i) {
    const double ideal = M_PI / est.alphas[i];
    CHECK(est.counts[i] >= static_cast<int>(ideal / 2.5));
    CHECK(est.counts[i] <= static_cast<int>(ideal * 2.5) + 2);
  }
  // greedy counts quantize, so the strict default window can stay empty; a
  // looser window threshold must report a usable linear regime
  const BoxDimEstimate relaxed =
      estimate_boxdim_cloud(cloud, {0.5, 0.35, 0.25, 0.18, 0.12, 0.08}, 0.85);
  CHECK(relaxed.alpha_s > 0.0);
  CHECK(relaxed.status == BoxDimEstimate::Status::Ok);
  CHECK(relaxed.slope >= 0.75);
  CHECK(relaxed.slope <= 1.25);
}

TEST_CASE("boxdim of 1-group-sparse secants in R^8") {
  const LevelsModel m = LevelsModel::plain_sparse(8, 1);
  const auto sampler = make_secant_sampler(m, 404);
  const BoxDimEstimate est =
      estimate_boxdim(sampler, {0.4, 0.3, 0.22, 0.16, 0.12, 0.09}, 6000);
  CHECK(est.slope >= 0.7);
  CHECK(est.slope <= 1.6);
}

TEST_CASE("build_subspace rank behaviour") {
  Vector e1 = Vector::Zero(3), e2 = Vector::Zero(3);
  e1[0] = 1.0;
  e2[1] = 1.0;

  CHECK(build_subspace({e1, 2.0 * e1}).dim() == 1);

  const SubspaceBasis plane = build_subspace({e1, e2});
  CHECK(plane.dim() == 2);
  CHECK(plane.project(e1).isApprox(e1, 1e-12));
  CHECK(plane.project(e2).isApprox(e2, 1e-12));

  const auto cloud = circle_cloud(600, 9);
  const CoverResult cover = greedy_cover(cloud, 0.2);
  CHECK(build_subspace(cover).dim() == 2);
}

TEST_CASE("projection certification") {
  const LevelsModel m = LevelsModel::plain_sparse(6, 2);

  // full space: alpha_hat = 0
  SubspaceBasis full;
  full.basis = Matrix::Identity(6, 6);
  const auto sampler = make_secant_sampler(m, 12);
  CHECK(certify_projection(full, sampler, 100) == 0.0);

  // H orthogonal to every secant: alpha_hat = 1
  LevelsModel first_two;
  first_two.ambient_dim = 6;
  GroupStructure g;
  g.ambient_dim = 6;
  g.groups = {{0}, {1}};
  first_two.levels.push_back({g, 1});
  first_two.validate();
  SubspaceBasis ortho;
  ortho.basis = Matrix::Zero(6, 2);
  ortho.basis(4, 0) = 1.0;
  ortho.basis(5, 1) = 1.0;
  const auto sampler2 = make_secant_sampler(first_two, 13);
  CHECK(certify_projection(ortho, sampler2, 50) == 1.0);
}

TEST_CASE("cover members certify alpha exactly") {
  const LevelsModel m = LevelsModel::plain_sparse(8, 2);
  std::vector<Vector> cloud;
  Rng rng(21);
  for (int i = 0; i < 300; ++i) cloud.push_back(sample_secant(m, rng));
  const double alpha = 0.3;
  const CoverResult cover = greedy_cover(cloud, alpha);
  const SubspaceBasis H = build_subspace(cover);
  CHECK(certify_projection(H, cloud) <= alpha);

  // contraction invariant on fresh samples
  for (int i = 0; i < 200; ++i) {
    const Vector z = sample_secant(m, rng);
    CHECK(H.project_coords(z).norm() <= z.norm() * (1.0 + 1e-10));
  }
}

TEST_CASE("subspace JSON round trip") {
  Vector e1 = Vector::Zero(3), e2 = Vector::Zero(3);
  e1[0] = 1.0;
  e2[2] = 1.0;
  const SubspaceBasis H = build_subspace({e1, e2});
  const SubspaceBasis back = parse_subspace_json(subspace_to_json(H), "roundtrip");
  CHECK(back.dim() == H.dim());
  CHECK(back.basis.isApprox(H.basis, 1e-12));

  CHECK_THROWS_AS(parse_subspace_json("{\"ambient_dim\": 2, \"basis\": [[1.0, 1.0], [0.0, 1.0]]}",
                                      "skew"),
                  ConfigError);
}
