#include "lowdim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lowdim/parallel.hpp"
#include "lowdim/regularizer.hpp"

namespace lowdim {

using nlohmann::json;

OutputFormat parse_output_format(const std::string& name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  throw ConfigError("unknown output format \"" + name + "\" (csv|json)");
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string cell_to_string(const CellValue& v) {
  if (std::holds_alternative<std::int64_t>(v)) return std::to_string(std::get<std::int64_t>(v));
  if (std::holds_alternative<double>(v)) return format_double(std::get<double>(v));
  if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? "true" : "false";
  return std::get<std::string>(v);
}

json cell_to_json(const CellValue& v) {
  if (std::holds_alternative<std::int64_t>(v)) return std::get<std::int64_t>(v);
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
  return std::get<std::string>(v);
}

std::string join_ints(const std::vector<int>& v, char sep = ';') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(sep);
    out += std::to_string(v[i]);
  }
  return out;
}

int resolve_threads(const ExperimentConfig& cfg) {
  return cfg.threads > 0 ? cfg.threads : hardware_threads();
}

}  // namespace

std::string table_to_csv(const ResultTable& t) {
  std::string out;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c) out.push_back(',');
    out += t.columns[c];
  }
  out.push_back('\n');
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out.push_back(',');
      out += cell_to_string(row[c]);
    }
    out.push_back('\n');
  }
  return out;
}

std::string table_to_json(const ResultTable& t) {
  json doc;
  doc["columns"] = t.columns;
  doc["rows"] = json::array();
  for (const auto& row : t.rows) {
    json r = json::array();
    for (const auto& v : row) r.push_back(cell_to_json(v));
    doc["rows"].push_back(r);
  }
  doc["summary"] = t.summary;
  return doc.dump(2) + "\n";
}

void emit(const ResultTable& t, const std::string& path, OutputFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit: cannot open " + path + " for writing");
  const std::string payload = format == OutputFormat::Csv ? table_to_csv(t) : table_to_json(t);
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("emit: write failed for " + path);
}

bool table_has_violations(const ResultTable& t) {
  const auto it = std::find(t.columns.begin(), t.columns.end(), "violation");
  if (it == t.columns.end()) return false;
  const std::size_t col = static_cast<std::size_t>(it - t.columns.begin());
  for (const auto& row : t.rows)
    if (std::holds_alternative<bool>(row[col]) && std::get<bool>(row[col])) return true;
  return false;
}

Regularizer make_regularizer(const std::string& kind, const std::vector<double>& weights,
                             const LevelsModel& model) {
  if (kind == "l1") return Regularizer::l1(model.ambient_dim);
  if (kind == "adapted") return Regularizer::adapted(model);
  if (kind == "unit")
    return Regularizer::group_levels(model, std::vector<double>(model.levels.size(), 1.0));
  if (kind == "group-levels") return Regularizer::group_levels(model, weights);
  throw ConfigError("unknown regularizer kind \"" + kind + "\" (l1|adapted|unit|group-levels)");
}

namespace {

LevelsModel model_with_sparsity(const LevelsModel& base, const std::vector<int>& k) {
  if (k.size() != base.levels.size())
    throw ConfigError("k grid entry has " + std::to_string(k.size()) + " levels, model has " +
                      std::to_string(base.levels.size()));
  LevelsModel m = base;
  for (std::size_t j = 0; j < k.size(); ++j) m.levels[j].sparsity = k[j];
  m.validate();
  return m;
}

Vector random_unit_vector(Rng& rng, int n) {
  Vector u(n);
  for (;;) {
    for (int i = 0; i < n; ++i) u[i] = rng.normal();
    const double nn = u.norm();
    if (nn > 1e-300) return u / nn;
  }
}

}  // namespace

ResultTable run_phase(const ExperimentConfig& cfg) {
  ResultTable t;
  t.columns = {"m",          "k",          "trials",       "successes", "success_rate",
               "nonconverged", "mean_rel_err", "stdev_rel_err", "cell_seed"};

  std::vector<std::vector<int>> k_grid = cfg.k_grid;
  if (k_grid.empty()) {
    std::vector<int> k;
    for (const auto& lv : cfg.model.levels) k.push_back(lv.sparsity);
    k_grid.push_back(k);
  }

  struct Cell {
    int m;
    std::vector<int> k;
  };
  std::vector<Cell> cells;
  for (int m : cfg.m_grid)
    for (const auto& k : k_grid) cells.push_back({m, k});
  if (cells.empty()) {
    t.summary["cells"] = 0;
    return t;
  }

  struct TrialOut {
    double rel_err = 0.0;
    bool success = false;
    bool converged = false;
  };
  const std::size_t n_cells = cells.size();
  const std::size_t per_cell = static_cast<std::size_t>(cfg.trials);
  std::vector<TrialOut> results(n_cells * per_cell);

  parallel_for(n_cells * per_cell, resolve_threads(cfg), [&](std::size_t idx) {
    const std::size_t ci = idx / per_cell;
    const std::size_t ti = idx % per_cell;
    const Cell& cell = cells[ci];
    const LevelsModel model = model_with_sparsity(cfg.model, cell.k);
    const std::uint64_t trial_seed = derive_seed(cfg.master_seed, {ci, ti});

    const Vector x = sample_model(model, derive_seed(trial_seed, {1}));
    const MeasureOp A = MeasureOp::dense(cfg.op_kind, cell.m, model.ambient_dim,
                                         derive_seed(trial_seed, {2}));
    Vector y = A.apply(x);
    if (cfg.noise > 0.0) {
      Rng rng(derive_seed(trial_seed, {3}));
      y += cfg.noise * random_unit_vector(rng, cell.m);
    }
    const Regularizer f = make_regularizer(cfg.reg_kind, cfg.reg_weights, model);
    const DecodeResult r = decode_convex(A, y, cfg.epsilon, f, cfg.decode);

    TrialOut out;
    out.converged = r.converged;
    const double xn = x.norm();
    out.rel_err = xn > 0.0 ? (r.x_star - x).norm() / xn : (r.x_star - x).norm();
    out.success = r.converged && out.rel_err <= cfg.tau;
    results[idx] = out;
  });

  for (std::size_t ci = 0; ci < n_cells; ++ci) {
    std::int64_t successes = 0, nonconverged = 0;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t ti = 0; ti < per_cell; ++ti) {
      const TrialOut& r = results[ci * per_cell + ti];
      successes += r.success ? 1 : 0;
      nonconverged += r.converged ? 0 : 1;
      sum += r.rel_err;
      sum_sq += r.rel_err * r.rel_err;
    }
    const double mean = sum / static_cast<double>(per_cell);
    const double var = std::max(0.0, sum_sq / static_cast<double>(per_cell) - mean * mean);
    t.rows.push_back({static_cast<std::int64_t>(cells[ci].m), join_ints(cells[ci].k),
                      static_cast<std::int64_t>(per_cell), successes,
                      static_cast<double>(successes) / static_cast<double>(per_cell), nonconverged,
                      mean, std::sqrt(var),
                      std::to_string(derive_seed(cfg.master_seed, {ci, 0}))});
  }
  t.summary["cells"] = n_cells;
  t.summary["trials_per_cell"] = cfg.trials;
  return t;
}

ResultTable run_noise(const ExperimentConfig& cfg) {
  ResultTable t;
  t.columns = {"trial", "status", "delta",   "delta0", "C",         "D",   "e_norm", "epsilon",
               "d_f",   "lhs",    "rhs",     "violation", "iterations", "seed"};

  const LevelsModel& model = cfg.model;
  const int J = model.level_count();
  std::vector<int> k;
  for (const auto& lv : model.levels) k.push_back(lv.sparsity);
  const double delta0 =
      J == 1 ? 1.0 / std::sqrt(2.0) : 1.0 / std::sqrt(2.0 + static_cast<double>(J));
  const Regularizer f = make_regularizer(cfg.reg_kind, cfg.reg_weights, model);

  struct TrialRow {
    std::string status;
    double delta = 0.0, C = 0.0, D = 0.0, e_norm = 0.0, d_f = 0.0, lhs = 0.0, rhs = 0.0;
    bool violation = false;
    std::int64_t iterations = 0;
    std::uint64_t seed = 0;
  };
  std::vector<TrialRow> rows(static_cast<std::size_t>(cfg.trials));

  parallel_for(static_cast<std::size_t>(cfg.trials), resolve_threads(cfg), [&](std::size_t ti) {
    TrialRow row;
    row.seed = derive_seed(cfg.master_seed, {ti});
    const MeasureOp A =
        MeasureOp::dense(cfg.op_kind, cfg.m, model.ambient_dim, derive_seed(row.seed, {1}));
    const RipReport rip = rip_exact(A, model, cfg.budget);
    row.delta = rip.delta_hat;
    if (rip.delta_hat >= delta0) {
      row.status = "skipped_delta";
      rows[ti] = row;
      return;
    }
    const StabilityConstants sc = stability_constants(J, k, rip.delta_hat);
    row.C = sc.C;
    row.D = sc.D;

    Vector x = sample_model(model, derive_seed(row.seed, {2}));
    if (cfg.model_error > 0.0) {
      Rng rng(derive_seed(row.seed, {3}));
      x += cfg.model_error * random_unit_vector(rng, model.ambient_dim);
    }
    const double frac = cfg.noise_fracs.empty()
                            ? 1.0
                            : cfg.noise_fracs[ti % cfg.noise_fracs.size()];
    Rng rng_e(derive_seed(row.seed, {4}));
    const Vector e = cfg.epsilon * frac * random_unit_vector(rng_e, cfg.m);
    row.e_norm = e.norm();
    const Vector y = A.apply(x) + e;

    const DecodeResult r = decode_convex(A, y, cfg.epsilon, f, cfg.decode);
    row.iterations = r.iterations;
    row.d_f = dist_f(x, model, f);
    row.lhs = (r.x_star - x).norm();
    row.rhs = sc.C * (row.e_norm + cfg.epsilon) + sc.D * row.d_f;
    if (!r.converged) {
      row.status = "nonconverged";
    } else {
      row.status = "ok";
      row.violation = row.lhs > row.rhs + 1e-9 * (1.0 + row.rhs);
    }
    rows[ti] = row;
  });

  std::int64_t valid = 0, skipped = 0, nonconverged = 0, violations = 0;
  for (std::size_t ti = 0; ti < rows.size(); ++ti) {
    const TrialRow& r = rows[ti];
    if (r.status == "ok") ++valid;
    if (r.status == "skipped_delta") ++skipped;
    if (r.status == "nonconverged") ++nonconverged;
    if (r.violation) ++violations;
    t.rows.push_back({static_cast<std::int64_t>(ti), r.status, r.delta, delta0, r.C, r.D, r.e_norm,
                      cfg.epsilon, r.d_f, r.lhs, r.rhs, r.violation, r.iterations,
                      std::to_string(r.seed)});
  }
  t.summary["valid_trials"] = valid;
  t.summary["skipped_delta"] = skipped;
  t.summary["nonconverged"] = nonconverged;
  t.summary["violations"] = violations;
  return t;
}

ResultTable run_rip_scaling(const ExperimentConfig& cfg) {
  ResultTable t;
  t.columns = {"m", "median_delta", "mean_delta", "stdev_delta", "seeds", "method", "seed"};
  const bool exact = cfg.rip_method == "exact";
  if (!exact && cfg.rip_method != "sampled")
    throw ConfigError("rip experiment: method must be exact or sampled");

  const std::size_t n_m = cfg.m_grid.size();
  const std::size_t per_m = static_cast<std::size_t>(cfg.seeds);
  std::vector<double> deltas(n_m * per_m, 0.0);

  parallel_for(n_m * per_m, resolve_threads(cfg), [&](std::size_t idx) {
    const std::size_t mi = idx / per_m;
    const std::size_t si = idx % per_m;
    const std::uint64_t seed = derive_seed(cfg.master_seed, {mi, si});
    const MeasureOp A = MeasureOp::dense(cfg.op_kind, cfg.m_grid[mi], cfg.model.ambient_dim,
                                         derive_seed(seed, {1}));
    if (exact) {
      deltas[idx] = rip_exact(A, cfg.model, cfg.budget).delta_hat;
    } else {
      const auto sampler = make_secant_sampler(cfg.model, derive_seed(seed, {2}));
      deltas[idx] = rip_sampled(A, sampler, cfg.rip_samples, seed).delta_hat;
    }
  });

  std::int64_t m_star = -1;
  for (std::size_t mi = 0; mi < n_m; ++mi) {
    std::vector<double> d(deltas.begin() + static_cast<std::ptrdiff_t>(mi * per_m),
                          deltas.begin() + static_cast<std::ptrdiff_t>((mi + 1) * per_m));
    std::sort(d.begin(), d.end());
    const double median =
        per_m % 2 == 1 ? d[per_m / 2] : 0.5 * (d[per_m / 2 - 1] + d[per_m / 2]);
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(per_m);
    double var = 0.0;
    for (double v : d) var += (v - mean) * (v - mean);
    var /= static_cast<double>(per_m);
    if (m_star < 0 && median <= cfg.delta0) m_star = cfg.m_grid[mi];
    t.rows.push_back({static_cast<std::int64_t>(cfg.m_grid[mi]), median, mean, std::sqrt(var),
                      static_cast<std::int64_t>(per_m), cfg.rip_method,
                      std::to_string(derive_seed(cfg.master_seed, {mi, 0}))});
  }
  t.summary["delta0"] = cfg.delta0;
  t.summary["m_star"] = m_star;  // -1: no grid point reached delta0
  return t;
}

ResultTable run_boxdim(const ExperimentConfig& cfg) {
  ResultTable t;
  t.columns = {"alpha", "count"};
  const auto sampler = make_secant_sampler(cfg.model, cfg.master_seed);
  const BoxDimEstimate est = estimate_boxdim(sampler, cfg.alpha_grid, cfg.samples);
  for (std::size_t i = 0; i < est.alphas.size(); ++i)
    t.rows.push_back({est.alphas[i], static_cast<std::int64_t>(est.counts[i])});
  t.summary["slope"] = est.slope;
  t.summary["intercept"] = est.intercept;
  t.summary["alpha_S"] = est.alpha_s;
  t.summary["r2"] = est.r2;
  t.summary["status"] = est.status == BoxDimEstimate::Status::Ok
                            ? "ok"
                            : (est.status == BoxDimEstimate::Status::DegenerateFit
                                   ? "degenerate-fit"
                                   : "no-linear-regime");
  t.summary["samples"] = cfg.samples;
  t.summary["seed"] = cfg.master_seed;
  return t;
}

ResultTable run_delta_sigma(const ExperimentConfig& cfg) {
  ResultTable t;
  t.columns = {"trial", "heuristic", "sup_approx", "violation", "seed"};
  const Regularizer f = make_regularizer(cfg.reg_kind, cfg.reg_weights, cfg.model);
  DeltaSigmaOpts opts;
  opts.sigma.gap_tol = cfg.sigma_gap_tol;
  opts.sigma.budget = cfg.budget;
  opts.candidate_supports = cfg.candidate_supports;
  const DeltaReport rep =
      delta_sigma_empirical(f, cfg.model, cfg.trials, cfg.master_seed, opts, resolve_threads(cfg));
  std::vector<char> violated(static_cast<std::size_t>(cfg.trials), 0);
  for (int v : rep.violations) violated[static_cast<std::size_t>(v)] = 1;
  for (int ti = 0; ti < cfg.trials; ++ti)
    t.rows.push_back({static_cast<std::int64_t>(ti), rep.heuristic_values[static_cast<std::size_t>(ti)],
                      rep.sup_values[static_cast<std::size_t>(ti)],
                      static_cast<bool>(violated[static_cast<std::size_t>(ti)]),
                      std::to_string(derive_seed(cfg.master_seed, {static_cast<std::uint64_t>(ti)}))});
  t.summary["lower_bound"] = rep.lower_bound_closed_form;
  t.summary["empirical_min"] = rep.empirical_min;
  t.summary["trials"] = rep.trials;
  t.summary["seed"] = rep.seed;
  t.summary["violations"] = rep.violations;
  t.summary["adapted_weights"] = rep.adapted_weights;
  t.summary["estimate"] = "upper-bound";
  return t;
}

ResultTable run_experiment(const ExperimentConfig& cfg) {
  if (cfg.kind == "phase") return run_phase(cfg);
  if (cfg.kind == "noise") return run_noise(cfg);
  if (cfg.kind == "rip") return run_rip_scaling(cfg);
  if (cfg.kind == "boxdim") return run_boxdim(cfg);
  if (cfg.kind == "delta-sigma") return run_delta_sigma(cfg);
  throw ConfigError("unknown experiment kind \"" + cfg.kind + "\"");
}

namespace {

const char* const kKnownKeys[] = {
    "experiment", "model",       "model_file",  "operator",    "regularizer", "m_grid",
    "k_grid",     "m",           "trials",      "seeds",       "tau",         "epsilon",
    "noise",      "noise_fracs", "model_error", "delta0",      "rip_method",  "rip_samples",
    "alpha_grid", "samples",     "candidate_supports",         "sigma_gap_tol",
    "master_seed", "decode",     "budget",      "threads"};

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": JSON parse error: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(origin + ": config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (std::find_if(std::begin(kKnownKeys), std::end(kKnownKeys),
                     [&](const char* k) { return key == k; }) == std::end(kKnownKeys))
      throw ConfigError(origin + ": unknown key \"" + key + "\"");
  }

  ExperimentConfig cfg;
  if (!doc.contains("experiment")) throw ConfigError(origin + ": missing \"experiment\"");
  cfg.kind = doc["experiment"].get<std::string>();

  if (doc.contains("model_file"))
    cfg.model = load_model_json(doc["model_file"].get<std::string>());
  else if (doc.contains("model"))
    cfg.model = parse_model_json(doc["model"].dump(), origin + ": model");
  else
    throw ConfigError(origin + ": needs \"model\" or \"model_file\"");

  if (doc.contains("operator")) {
    const json& op = doc["operator"];
    if (!op.is_object() || !op.contains("kind"))
      throw ConfigError(origin + ": operator spec needs \"kind\"");
    cfg.op_kind = parse_ensemble_kind(op["kind"].get<std::string>());
    if (op.contains("m")) cfg.m = op["m"].get<int>();
  }
  if (doc.contains("regularizer")) {
    const json& reg = doc["regularizer"];
    if (!reg.is_object() || !reg.contains("kind"))
      throw ConfigError(origin + ": regularizer spec needs \"kind\"");
    cfg.reg_kind = reg["kind"].get<std::string>();
    if (reg.contains("weights")) cfg.reg_weights = reg["weights"].get<std::vector<double>>();
  }

  if (doc.contains("m_grid")) cfg.m_grid = doc["m_grid"].get<std::vector<int>>();
  if (doc.contains("k_grid")) cfg.k_grid = doc["k_grid"].get<std::vector<std::vector<int>>>();
  if (doc.contains("m")) cfg.m = doc["m"].get<int>();
  if (doc.contains("trials")) cfg.trials = doc["trials"].get<int>();
  if (doc.contains("seeds")) cfg.seeds = doc["seeds"].get<int>();
  if (doc.contains("tau")) cfg.tau = doc["tau"].get<double>();
  if (doc.contains("epsilon")) cfg.epsilon = doc["epsilon"].get<double>();
  if (doc.contains("noise")) cfg.noise = doc["noise"].get<double>();
  if (doc.contains("noise_fracs")) cfg.noise_fracs = doc["noise_fracs"].get<std::vector<double>>();
  if (doc.contains("model_error")) cfg.model_error = doc["model_error"].get<double>();
  if (doc.contains("delta0")) cfg.delta0 = doc["delta0"].get<double>();
  if (doc.contains("rip_method")) cfg.rip_method = doc["rip_method"].get<std::string>();
  if (doc.contains("rip_samples")) cfg.rip_samples = doc["rip_samples"].get<int>();
  if (doc.contains("alpha_grid")) cfg.alpha_grid = doc["alpha_grid"].get<std::vector<double>>();
  if (doc.contains("samples")) cfg.samples = doc["samples"].get<int>();
  if (doc.contains("candidate_supports"))
    cfg.candidate_supports = doc["candidate_supports"].get<int>();
  if (doc.contains("sigma_gap_tol")) cfg.sigma_gap_tol = doc["sigma_gap_tol"].get<double>();
  if (doc.contains("master_seed")) cfg.master_seed = doc["master_seed"].get<std::uint64_t>();
  if (doc.contains("budget")) cfg.budget = doc["budget"].get<std::size_t>();
  if (doc.contains("threads")) cfg.threads = doc["threads"].get<int>();
  if (doc.contains("decode")) {
    const json& d = doc["decode"];
    if (d.contains("tol")) cfg.decode.tol = d["tol"].get<double>();
    if (d.contains("max_iter")) cfg.decode.max_iter = d["max_iter"].get<int>();
    if (d.contains("feas_tol")) cfg.decode.feas_tol = d["feas_tol"].get<double>();
  }

  if (cfg.trials < 1) throw ConfigError(origin + ": trials must be >= 1");
  if (cfg.tau <= 0.0) throw ConfigError(origin + ": tau must be positive");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), path);
}

}  // namespace lowdim
