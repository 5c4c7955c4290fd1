#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lowdim/model.hpp"
#include "lowdim/secant.hpp"

namespace lowdim {

enum class EnsembleKind { DenseGaussian, DenseBernoulli, SphereRows, ExplicitMatrix };

std::string ensemble_kind_name(EnsembleKind kind);
EnsembleKind parse_ensemble_kind(const std::string& name);

// Linear measurement operator R^n -> R^m. Either a dense random matrix or
// the composition M * P_H where P_H returns coordinates in the basis of H.
class MeasureOp {
 public:
  static MeasureOp dense(EnsembleKind kind, int m, int input_dim, std::uint64_t seed);
  static MeasureOp explicit_matrix(Matrix M);
  static MeasureOp composed(MeasureOp inner, SubspaceBasis H);

  Vector apply(const Vector& x) const;
  Vector adjoint(const Vector& u) const;

  int rows() const { return static_cast<int>(mat_.rows()); }
  int input_dim() const { return basis_ ? basis_->ambient_dim() : static_cast<int>(mat_.cols()); }
  bool is_composed() const { return basis_.has_value(); }
  EnsembleKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }

  // m x input_dim materialization (folds in P_H for composed operators).
  Matrix dense_matrix() const;
  const Matrix& inner_matrix() const { return mat_; }

 private:
  MeasureOp() = default;
  Matrix mat_;                         // m x d
  std::optional<SubspaceBasis> basis_; // present for composed operators
  EnsembleKind kind_ = EnsembleKind::ExplicitMatrix;
  std::uint64_t seed_ = 0;
};

// Largest singular value of A via power iteration on A^T A.
double operator_norm_estimate(const MeasureOp& A, double rel_tol = 1e-6, int max_iter = 10000);

struct RipReport {
  enum class Method { Sampled, ExactEnumeration, ExtremalSecant };

  double delta_hat = 0.0;
  Method method = Method::Sampled;
  std::int64_t samples_or_supports = 0;
  std::uint64_t seed = 0;
  std::size_t budget = 0;
};

std::string rip_method_name(RipReport::Method m);
std::string rip_report_to_json(const RipReport& r);

// max |  ||Az||^2 - 1 | over sampled unit secants; lower-bounds the true RIP
// constant on the secant set.
RipReport rip_sampled(const MeasureOp& A, const SecantSampler& sampler, int n_trials,
                      std::uint64_t seed);

// Exact RIP constant on the secant set of the model via enumeration of the
// doubled supports and restricted-Gram eigenvalues. Refuses (BudgetExceeded)
// when the enumeration is too large; never falls back to sampling.
RipReport rip_exact(const MeasureOp& A, const LevelsModel& model, std::size_t budget = 1000000);

// Unit vectors achieving the extreme restricted-Gram eigenvalues, one pair
// per enumerated doubled support. rip_sampled over these equals rip_exact.
struct ExtremalSecants {
  std::vector<Vector> vectors;

  std::size_t size() const { return vectors.size(); }
  SecantSampler sampler() const;  // cycles through the list
};

ExtremalSecants extremal_secants(const MeasureOp& A, const LevelsModel& model,
                                 std::size_t budget = 1000000);

// Monte-Carlo check of E ||Mx||^2 = ||x||^2 over fresh operator draws.
struct IsotropyResult {
  double mean = 0.0;
  double stderr_mean = 0.0;
  double target = 0.0;  // ||x||^2
  int trials = 0;
  std::uint64_t seed = 0;
};

IsotropyResult isotropy_check(EnsembleKind kind, int m, const Vector& x, int trials,
                              std::uint64_t seed, int threads = 1);

// Empirical tails of |h_M(y) - h_M(z)| against lambda * ||y - z|| with
// h_M(x) = ||Mx||^2 - ||x||^2, plus fitted subgaussian/subexponential rates.
struct ConcentrationRow {
  double lambda = 0.0;
  std::int64_t tail_count = 0;
  double p_hat = 0.0;
  bool included = false;  // enough tail events and inside the fitted regime
};

struct ConcentrationResult {
  std::vector<ConcentrationRow> rows;
  double c1 = 0.0;         // subgaussian rate: P <= 2 exp(-c1 m lambda^2)
  double c2 = 0.0;         // subexponential rate: P <= 2 exp(-c2 m lambda)
  double crossover = 0.0;  // fitted c2/c1 regime boundary
  int trials = 0;
  std::uint64_t seed = 0;
  bool fit_ok = false;
  std::int64_t min_tail_events = 50;
};

ConcentrationResult concentration_probe(EnsembleKind kind, int m, const Vector& y, const Vector& z,
                                        const std::vector<double>& lambda_grid, int trials,
                                        std::uint64_t seed, int threads = 1);

// ceil( (1/delta0^2) * (C_abs/min(c1,c2)) * max(s log(1/alpha_S), log(6/xi)) ).
// Natural logarithms.
std::int64_t sufficient_m_general(double s, double alpha_s, double xi, double delta0, double c1,
                                  double c2, double c_abs = 1.0);

// ceil( C_abs * J * sum_j (k_j d_j + k_j log(3 e |G_j| / k_j)) ); k_j = 0
// levels contribute nothing.
std::int64_t sufficient_m_levels(const LevelsModel& model, double c_abs = 1.0);

// Operator spec JSON:
// {"kind": "...", "m": .., "seed": .., "input_dim": .., "compose_with_H": "path",
//  "matrix": [[row 0 ...], ...]}  (matrix only for kind explicit-matrix)
MeasureOp operator_from_json(const std::string& text, const std::string& origin,
                             int default_input_dim = 0);
MeasureOp load_operator_json(const std::string& path, int default_input_dim = 0);

}  // namespace lowdim
