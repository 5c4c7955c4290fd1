#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lowdim/errors.hpp"
#include "lowdim/rng.hpp"

namespace lowdim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A finite collection of non-overlapping groups of coordinates inside an
// ambient dimension. Groups need not cover every coordinate; uncovered
// coordinates are zero in every model vector.
struct GroupStructure {
  int ambient_dim = 0;
  std::vector<std::vector<int>> groups;

  int group_count() const { return static_cast<int>(groups.size()); }
  int max_group_size() const;  // d in covering bounds
  void validate() const;       // disjoint, nonempty, in-range
};

// Group sparsity in levels: J orthogonal coordinate blocks, each carrying a
// group structure and a per-level sparsity budget k_j.
struct LevelsModel {
  struct Level {
    GroupStructure structure;
    int sparsity = 0;  // k_j, number of active groups allowed
  };

  int ambient_dim = 0;
  std::vector<Level> levels;

  int level_count() const { return static_cast<int>(levels.size()); }
  void validate() const;  // blocks disjoint across levels, k_j <= |G_j|

  // Coordinates belonging to some group of some level, ascending.
  std::vector<int> covered_indices() const;

  // Same structure with per-level sparsity 2*k_j capped at |G_j|. The secant
  // set of the model equals the doubled model.
  LevelsModel doubled() const;

  // Convenience single-level model with singleton groups {0},...,{n-1}.
  static LevelsModel plain_sparse(int n, int k);
};

enum class MagnitudeLaw { Gaussian, Rademacher, Uniform };

// Absolute support-detection threshold: 1e-12 relative to the vector norm.
double default_support_tol(const Vector& x);

// Groups g with ||x_g|| strictly greater than tol, ascending group index.
// tol < 0 selects the default relative threshold.
std::vector<int> group_support(const Vector& x, const GroupStructure& G, double tol = -1.0);

bool is_member(const Vector& x, const LevelsModel& model, double tol = -1.0);

// Euclidean-closest point of the model: per level keeps the k_j groups of
// largest Euclidean mass (ties to the smallest group index).
Vector best_model_approx(const Vector& x, const LevelsModel& model);

Vector sample_model(const LevelsModel& model, std::uint64_t seed,
                    MagnitudeLaw law = MagnitudeLaw::Gaussian);
Vector sample_model(const LevelsModel& model, Rng& rng,
                    MagnitudeLaw law = MagnitudeLaw::Gaussian);

// Normalized difference of two independent model samples; unit norm.
Vector sample_secant(const LevelsModel& model, std::uint64_t seed);
Vector sample_secant(const LevelsModel& model, Rng& rng);

// Stateful stream of unit secants.
using SecantSampler = std::function<Vector()>;
SecantSampler make_secant_sampler(const LevelsModel& model, std::uint64_t seed);

// Lexicographic enumeration of coordinate supports with exactly
// min(counts[j], |G_j|) groups chosen in level j. Throws BudgetExceeded when
// the combination count would exceed `budget`.
std::vector<std::vector<int>> enumerate_model_supports(const LevelsModel& model,
                                                       const std::vector<int>& counts,
                                                       std::size_t budget);

// Count of the enumeration above without materializing it.
double count_model_supports(const LevelsModel& model, const std::vector<int>& counts);

// Maximal admissible supports of the model itself (counts = k_j).
std::vector<std::vector<int>> enumerate_maximal_supports(const LevelsModel& model,
                                                         std::size_t budget);

// JSON model files: {"ambient_dim": n, "levels": [{"groups": [[..],..], "k": k}, ..]}.
LevelsModel parse_model_json(const std::string& text, const std::string& origin);
LevelsModel load_model_json(const std::string& path);
std::string model_to_json(const LevelsModel& model);

}  // namespace lowdim
