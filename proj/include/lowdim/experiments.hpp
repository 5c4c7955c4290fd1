#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lowdim/decode.hpp"
#include "lowdim/delta_sigma.hpp"
#include "lowdim/measure.hpp"
#include "lowdim/model.hpp"

namespace lowdim {

enum class OutputFormat { Csv, Json };

OutputFormat parse_output_format(const std::string& name);

using CellValue = std::variant<std::int64_t, double, std::string, bool>;

// Deterministic experiment output: fixed column order, floats serialized
// with 17 significant digits in CSV. JSON carries an extra summary object.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<CellValue>> rows;
  nlohmann::json summary = nlohmann::json::object();
};

std::string table_to_csv(const ResultTable& t);
std::string table_to_json(const ResultTable& t);
void emit(const ResultTable& t, const std::string& path, OutputFormat format);

// True when any row flags a violated invariant (CLI exit code 2).
bool table_has_violations(const ResultTable& t);

struct ExperimentConfig {
  std::string kind;  // phase | noise | rip | boxdim | delta-sigma
  LevelsModel model;

  EnsembleKind op_kind = EnsembleKind::DenseGaussian;

  std::string reg_kind = "adapted";  // l1 | adapted | group-levels | unit
  std::vector<double> reg_weights;

  std::vector<int> m_grid;
  std::vector<std::vector<int>> k_grid;  // per-level sparsity overrides
  int m = 0;

  int trials = 1;
  int seeds = 1;
  double tau = 1e-4;       // relative-error success threshold
  double epsilon = 0.0;    // decoder data-fit radius
  double noise = 0.0;      // actual noise norm (phase)
  std::vector<double> noise_fracs{1.0};  // ||e|| = frac * epsilon (noise)
  double model_error = 0.0;

  double delta0 = 0.5;
  std::string rip_method = "exact";  // exact | sampled
  int rip_samples = 2000;

  std::vector<double> alpha_grid;
  int samples = 1000;

  int candidate_supports = 3;
  double sigma_gap_tol = 1e-12;

  std::uint64_t master_seed = 1;
  DecodeOpts decode;
  std::size_t budget = 1000000;
  int threads = 0;  // 0 = hardware concurrency
};

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin);
ExperimentConfig load_experiment_config(const std::string& path);

Regularizer make_regularizer(const std::string& kind, const std::vector<double>& weights,
                             const LevelsModel& model);

// Recovery success rates over (m, k) cells; per-trial seeds derived from
// (master_seed, cell index, trial index).
ResultTable run_phase(const ExperimentConfig& cfg);

// Per-trial check of ||x* - x|| <= C(delta) (||e|| + eps) + D(delta) d_f(x)
// with the measured exact RIP constant; cells with delta >= delta0 skipped.
ResultTable run_noise(const ExperimentConfig& cfg);

// Median RIP estimate per m over seeds; summary reports the smallest m whose
// median clears delta0.
ResultTable run_rip_scaling(const ExperimentConfig& cfg);

// Covering counts per alpha with the box-dimension fit in the summary.
ResultTable run_boxdim(const ExperimentConfig& cfg);

// Per-sample descent-vector report with the closed-form lower bound.
ResultTable run_delta_sigma(const ExperimentConfig& cfg);

ResultTable run_experiment(const ExperimentConfig& cfg);

}  // namespace lowdim
