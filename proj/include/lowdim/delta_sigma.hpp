#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lowdim/model.hpp"
#include "lowdim/regularizer.hpp"

namespace lowdim {

// delta_Sigma(x, z) = -<x,z> / (||x|| sqrt(||x+z||_Sigma^2 - ||x||^2 - 2<x,z>)).
// Returns 0 when the numerator is nonpositive, nullopt (undefined) when the
// radicand is nonpositive with a positive numerator. Requires x in Sigma\{0}.
std::optional<double> delta_xz(const Vector& x, const Vector& z, const LevelsModel& model,
                               SigmaNormOpts opts = {});

// A descent vector z of f at a model point x: f(x + z) <= f(x).
struct DescentSample {
  Vector z;
  Vector witness_x;
};

// Draws x in Sigma, a random direction u in the span where f is finite, and
// scales y = t u to the level set f(y) = f(x); returns z = y - x.
DescentSample sample_descent(const Regularizer& f, const LevelsModel& model, std::uint64_t seed);
DescentSample sample_descent(const Regularizer& f, const LevelsModel& model, Rng& rng);

// z = z_T + z_Tc where T keeps, per level, the k_j groups of largest
// Euclidean mass (ties to the smallest group index); z_T lies in Sigma.
struct SupportSplit {
  Vector z_T;
  Vector z_Tc;
};

SupportSplit split_best_support(const Vector& z, const LevelsModel& model);

// delta(-z_T, z) = 1 / sqrt(||z_Tc||_Sigma^2 / ||z_T||^2 + 1).
double delta_heuristic(const Vector& z, const LevelsModel& model, SigmaNormOpts opts = {});

// Closed-form lower bounds on delta_Sigma(f_w): 1/sqrt(2) for J = 1,
// 1/sqrt(2 + J kappa_w^2) for J >= 2 with kappa_w = max(w_j sqrt(k_j)) / min(...).
double delta_sigma_lower_bound(const LevelsModel& model, const std::vector<double>& weights);

struct DeltaSigmaOpts {
  SigmaNormOpts sigma;     // tightened gap tolerance recommended (1e-12)
  int candidate_supports = 3;  // extra sup-candidates ranked by projected mass
};

struct DeltaReport {
  double lower_bound_closed_form = 0.0;
  std::vector<double> heuristic_values;   // delta(-z_T, z) per sampled descent vector
  std::vector<double> sup_values;         // sup-approximation per sample (>= heuristic)
  double empirical_min = 0.0;             // min of sup_values
  int trials = 0;
  std::uint64_t seed = 0;
  std::vector<int> violations;            // samples with heuristic < bound - 1e-9
  bool adapted_weights = false;           // per-sample bound only asserted then
};

// Samples descent vectors of f and reports the empirical upper estimate of
// delta_Sigma(f) next to the closed-form lower bound. For the adapted
// weights every heuristic value must clear the bound; offenders are listed.
DeltaReport delta_sigma_empirical(const Regularizer& f, const LevelsModel& model, int trials,
                                  std::uint64_t seed, DeltaSigmaOpts opts = {}, int threads = 1);

std::string delta_report_to_json(const DeltaReport& r);

}  // namespace lowdim
