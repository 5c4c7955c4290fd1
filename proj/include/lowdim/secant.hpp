#pragma once

#include <vector>

#include "lowdim/model.hpp"

namespace lowdim {

// Greedy farthest-point cover of a sample cloud. Upper-bounds the covering
// number of the cloud; centers are samples.
struct CoverResult {
  double radius = 0.0;
  std::vector<Vector> centers;
  std::vector<int> center_indices;  // positions in the input cloud
  int samples_used = 0;
};

CoverResult greedy_cover(const std::vector<Vector>& samples, double alpha);

// Farthest-point traversal. order[i] is the index of the (i+1)-th center;
// radii[i] is the covering radius achieved by the first i+1 centers. The
// traversal does not depend on alpha, so one pass serves a whole radius grid;
// it stops once the covering radius drops to stop_radius.
struct FarthestPointSequence {
  std::vector<int> order;
  std::vector<double> radii;
};

FarthestPointSequence farthest_point_sequence(const std::vector<Vector>& samples,
                                              double stop_radius = 0.0);

struct BoxDimEstimate {
  enum class Status { Ok, DegenerateFit, NoLinearRegime };

  std::vector<double> alphas;  // strictly decreasing grid
  std::vector<int> counts;     // greedy cover count per alpha
  double slope = 0.0;          // fitted dimension estimate
  double intercept = 0.0;
  double r2 = 0.0;
  double alpha_s = 0.0;        // largest grid alpha inside the fitted linear regime
  Status status = Status::Ok;
};

// Draws `samples` secants once and fits log N(alpha) against log(1/alpha).
// alpha_s is the largest grid alpha whose suffix window fits with R^2 >= r2_min.
BoxDimEstimate estimate_boxdim(const SecantSampler& sampler, const std::vector<double>& alpha_grid,
                               int samples, double r2_min = 0.98);
BoxDimEstimate estimate_boxdim_cloud(const std::vector<Vector>& cloud,
                                     const std::vector<double>& alpha_grid, double r2_min = 0.98);

// Orthonormal basis of a subspace H of the ambient space, stored as columns.
struct SubspaceBasis {
  Matrix basis;  // n x d, orthonormal columns

  int ambient_dim() const { return static_cast<int>(basis.rows()); }
  int dim() const { return static_cast<int>(basis.cols()); }

  // Coordinates of the orthogonal projection in the basis of H (d-vector).
  Vector project_coords(const Vector& x) const { return basis.transpose() * x; }
  // Projection embedded back in the ambient space.
  Vector project(const Vector& x) const { return basis * (basis.transpose() * x); }
};

// Span of the cover centers via rank-revealing orthogonalization.
SubspaceBasis build_subspace(const CoverResult& cover);
SubspaceBasis build_subspace(const std::vector<Vector>& spanning);

// Worst-case projection residual max(1 - ||P_H z||) over unit secants, in [0,1].
// Throws if the contraction ||P_H z|| <= ||z|| fails beyond 1e-10.
double certify_projection(const SubspaceBasis& H, const std::vector<Vector>& secants);
double certify_projection(const SubspaceBasis& H, const SecantSampler& sampler, int trials);

// JSON subspace files: {"ambient_dim": n, "basis": [[col 0 ...], [col 1 ...]]}.
SubspaceBasis parse_subspace_json(const std::string& text, const std::string& origin);
SubspaceBasis load_subspace_json(const std::string& path);
std::string subspace_to_json(const SubspaceBasis& H);

}  // namespace lowdim
