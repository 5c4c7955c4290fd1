#include "lowdim/measure.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lowdim/parallel.hpp"

namespace lowdim {

using nlohmann::json;

std::string ensemble_kind_name(EnsembleKind kind) {
  switch (kind) {
    case EnsembleKind::DenseGaussian: return "dense-gaussian";
    case EnsembleKind::DenseBernoulli: return "dense-bernoulli";
    case EnsembleKind::SphereRows: return "sphere-rows";
    case EnsembleKind::ExplicitMatrix: return "explicit-matrix";
  }
  return "unknown";
}

EnsembleKind parse_ensemble_kind(const std::string& name) {
  if (name == "dense-gaussian") return EnsembleKind::DenseGaussian;
  if (name == "dense-bernoulli") return EnsembleKind::DenseBernoulli;
  if (name == "sphere-rows") return EnsembleKind::SphereRows;
  if (name == "explicit-matrix") return EnsembleKind::ExplicitMatrix;
  throw ConfigError("unknown operator kind \"" + name + "\"");
}

namespace {

// Entries are drawn row-major so operators are bit-reproducible from the seed.
Matrix draw_dense(EnsembleKind kind, int m, int d, Rng& rng) {
  Matrix M(m, d);
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
  switch (kind) {
    case EnsembleKind::DenseGaussian:
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = rng.normal() * inv_sqrt_m;
      break;
    case EnsembleKind::DenseBernoulli:
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = rng.rademacher() * inv_sqrt_m;
      break;
    case EnsembleKind::SphereRows: {
      const double radius = std::sqrt(static_cast<double>(d) / static_cast<double>(m));
      for (int i = 0; i < m; ++i) {
        Vector g(d);
        for (int j = 0; j < d; ++j) g[j] = rng.normal();
        const double norm = g.norm();
        M.row(i) = (radius / norm) * g.transpose();
      }
      break;
    }
    case EnsembleKind::ExplicitMatrix:
      throw std::invalid_argument("draw_dense: explicit-matrix has no random draw");
  }
  return M;
}

}  // namespace

MeasureOp MeasureOp::dense(EnsembleKind kind, int m, int input_dim, std::uint64_t seed) {
  if (m < 0 || input_dim <= 0)
    throw std::invalid_argument("MeasureOp::dense: need m >= 0 and input_dim >= 1");
  MeasureOp op;
  Rng rng(seed);
  op.mat_ = draw_dense(kind, m, input_dim, rng);
  op.kind_ = kind;
  op.seed_ = seed;
  return op;
}

MeasureOp MeasureOp::explicit_matrix(Matrix M) {
  MeasureOp op;
  op.mat_ = std::move(M);
  op.kind_ = EnsembleKind::ExplicitMatrix;
  return op;
}

MeasureOp MeasureOp::composed(MeasureOp inner, SubspaceBasis H) {
  if (inner.is_composed()) throw std::invalid_argument("MeasureOp::composed: cannot nest compositions");
  if (static_cast<int>(inner.mat_.cols()) != H.dim())
    throw std::invalid_argument("MeasureOp::composed: inner operator input_dim " +
                                std::to_string(inner.mat_.cols()) + " != dim(H) " +
                                std::to_string(H.dim()));
  MeasureOp op = std::move(inner);
  op.basis_ = std::move(H);
  return op;
}

Vector MeasureOp::apply(const Vector& x) const {
  if (x.size() != input_dim())
    throw std::invalid_argument("MeasureOp::apply: dimension mismatch (got " +
                                std::to_string(x.size()) + ", want " + std::to_string(input_dim()) + ")");
  if (basis_) return mat_ * (basis_->basis.transpose() * x);
  return mat_ * x;
}

Vector MeasureOp::adjoint(const Vector& u) const {
  if (u.size() != rows()) throw std::invalid_argument("MeasureOp::adjoint: dimension mismatch");
  if (basis_) return basis_->basis * (mat_.transpose() * u);
  return mat_.transpose() * u;
}

Matrix MeasureOp::dense_matrix() const {
  if (basis_) return mat_ * basis_->basis.transpose();
  return mat_;
}

double operator_norm_estimate(const MeasureOp& A, double rel_tol, int max_iter) {
  const int n = A.input_dim();
  Rng rng(derive_seed(0x4f70ULL, {static_cast<std::uint64_t>(A.rows()),
                                  static_cast<std::uint64_t>(n)}));
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = A.adjoint(A.apply(v));
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    w /= nw;
    const double lambda_new = nw;  // Rayleigh estimate of ||A^T A||
    const bool done = std::abs(lambda_new - lambda) <= rel_tol * std::max(1.0, lambda_new);
    lambda = lambda_new;
    v = w;
    if (done && it >= 8) break;
  }
  return std::sqrt(lambda);
}

std::string rip_method_name(RipReport::Method m) {
  switch (m) {
    case RipReport::Method::Sampled: return "sampled";
    case RipReport::Method::ExactEnumeration: return "exact-enumeration";
    case RipReport::Method::ExtremalSecant: return "extremal-secant";
  }
  return "unknown";
}

std::string rip_report_to_json(const RipReport& r) {
  json doc;
  doc["delta_hat"] = r.delta_hat;
  doc["method"] = rip_method_name(r.method);
  doc["samples_or_supports"] = r.samples_or_supports;
  doc["seed"] = r.seed;
  doc["budget"] = r.budget;
  return doc.dump();
}

RipReport rip_sampled(const MeasureOp& A, const SecantSampler& sampler, int n_trials,
                      std::uint64_t seed) {
  if (n_trials < 1) throw std::invalid_argument("rip_sampled: n_trials must be >= 1");
  double worst = 0.0;
  for (int t = 0; t < n_trials; ++t) {
    const Vector z = sampler();
    worst = std::max(worst, std::abs(A.apply(z).squaredNorm() - 1.0));
  }
  RipReport r;
  r.delta_hat = worst;
  r.method = RipReport::Method::Sampled;
  r.samples_or_supports = n_trials;
  r.seed = seed;
  return r;
}

namespace {

// Exactness over the doubled supports: eigenvalues of a principal submatrix
// interlace, so the extremes over all admissible supports are attained on the
// maximal ones.
struct SupportScan {
  double delta = 0.0;
  std::int64_t supports = 0;
};

template <typename PerSupport>
SupportScan scan_doubled_supports(const MeasureOp& A, const LevelsModel& model, std::size_t budget,
                                  PerSupport&& per_support) {
  std::vector<int> counts;
  for (const auto& lv : model.levels)
    counts.push_back(std::min(2 * lv.sparsity, lv.structure.group_count()));
  const auto supports = enumerate_model_supports(model, counts, budget);
  const Matrix D = A.dense_matrix();
  SupportScan scan;
  scan.supports = static_cast<std::int64_t>(supports.size());
  for (const auto& idx : supports) {
    if (idx.empty()) continue;
    const int s = static_cast<int>(idx.size());
    Matrix B(D.rows(), s);
    for (int c = 0; c < s; ++c) B.col(c) = D.col(idx[static_cast<std::size_t>(c)]);
    const Matrix G = B.transpose() * B;
    per_support(idx, G, scan);
  }
  return scan;
}

}  // namespace

RipReport rip_exact(const MeasureOp& A, const LevelsModel& model, std::size_t budget) {
  if (A.input_dim() != model.ambient_dim)
    throw std::invalid_argument("rip_exact: operator/model dimension mismatch");
  const SupportScan scan = scan_doubled_supports(
      A, model, budget, [](const std::vector<int>&, const Matrix& G, SupportScan& s) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(G, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        s.delta = std::max({s.delta, hi - 1.0, 1.0 - lo});
      });
  RipReport r;
  r.delta_hat = scan.delta;
  r.method = RipReport::Method::ExactEnumeration;
  r.samples_or_supports = scan.supports;
  r.seed = A.seed();
  r.budget = budget;
  return r;
}

ExtremalSecants extremal_secants(const MeasureOp& A, const LevelsModel& model, std::size_t budget) {
  if (A.input_dim() != model.ambient_dim)
    throw std::invalid_argument("extremal_secants: operator/model dimension mismatch");
  const int n = model.ambient_dim;
  ExtremalSecants out;
  scan_doubled_supports(A, model, budget,
                        [&](const std::vector<int>& idx, const Matrix& G, SupportScan&) {
                          Eigen::SelfAdjointEigenSolver<Matrix> es(G);
                          const int s = static_cast<int>(idx.size());
                          for (int which : {0, s - 1}) {
                            Vector z = Vector::Zero(n);
                            const Vector v = es.eigenvectors().col(which);
                            for (int c = 0; c < s; ++c) z[idx[static_cast<std::size_t>(c)]] = v[c];
                            out.vectors.push_back(std::move(z));
                            if (s == 1) break;  // single coordinate: one extremal direction
                          }
                        });
  return out;
}

SecantSampler ExtremalSecants::sampler() const {
  if (vectors.empty()) throw std::invalid_argument("ExtremalSecants::sampler: empty list");
  auto pos = std::make_shared<std::size_t>(0);
  auto vecs = std::make_shared<std::vector<Vector>>(vectors);
  return [pos, vecs]() {
    const Vector& v = (*vecs)[*pos];
    *pos = (*pos + 1) % vecs->size();
    return v;
  };
}

namespace {

// ||Mx||^2 for one fresh draw of the ensemble, without materializing M.
double fresh_image_norm_sq(EnsembleKind kind, int m, const Vector& x, Rng& rng) {
  const int n = static_cast<int>(x.size());
  double acc = 0.0;
  switch (kind) {
    case EnsembleKind::DenseGaussian: {
      for (int i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += rng.normal() * x[j];
        acc += dot * dot;
      }
      return acc / static_cast<double>(m);
    }
    case EnsembleKind::DenseBernoulli: {
      for (int i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += rng.rademacher() * x[j];
        acc += dot * dot;
      }
      return acc / static_cast<double>(m);
    }
    case EnsembleKind::SphereRows: {
      const double scale = static_cast<double>(n) / static_cast<double>(m);
      for (int i = 0; i < m; ++i) {
        double dot = 0.0, gsq = 0.0;
        for (int j = 0; j < n; ++j) {
          const double g = rng.normal();
          dot += g * x[j];
          gsq += g * g;
        }
        acc += scale * dot * dot / gsq;
      }
      return acc;
    }
    case EnsembleKind::ExplicitMatrix:
      throw std::invalid_argument("isotropy/concentration: need a random ensemble kind");
  }
  return 0.0;
}

struct ChunkMoments {
  double sum = 0.0, sum_sq = 0.0;
};

constexpr int kChunk = 256;

}  // namespace

IsotropyResult isotropy_check(EnsembleKind kind, int m, const Vector& x, int trials,
                              std::uint64_t seed, int threads) {
  if (trials < 100) throw std::invalid_argument("isotropy_check: trials must be >= 100");
  if (m <= 0) throw std::invalid_argument("isotropy_check: m must be positive");
  const std::size_t chunks = (static_cast<std::size_t>(trials) + kChunk - 1) / kChunk;
  std::vector<ChunkMoments> parts(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const int lo = static_cast<int>(c) * kChunk;
    const int hi = std::min(trials, lo + kChunk);
    ChunkMoments cm;
    for (int t = lo; t < hi; ++t) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
      const double v = fresh_image_norm_sq(kind, m, x, rng);
      cm.sum += v;
      cm.sum_sq += v * v;
    }
    parts[c] = cm;
  });
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& cm : parts) {
    sum += cm.sum;
    sum_sq += cm.sum_sq;
  }
  IsotropyResult r;
  r.trials = trials;
  r.seed = seed;
  r.target = x.squaredNorm();
  r.mean = sum / trials;
  const double var = std::max(0.0, sum_sq / trials - r.mean * r.mean);
  r.stderr_mean = std::sqrt(var / trials);
  return r;
}

ConcentrationResult concentration_probe(EnsembleKind kind, int m, const Vector& y, const Vector& z,
                                        const std::vector<double>& lambda_grid, int trials,
                                        std::uint64_t seed, int threads) {
  if (y.size() != z.size()) throw std::invalid_argument("concentration_probe: dimension mismatch");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (lambda_grid[i] <= 0.0 || (i > 0 && lambda_grid[i] <= lambda_grid[i - 1]))
      throw std::invalid_argument("concentration_probe: lambda grid must be positive increasing");
  }
  if (trials < 1) throw std::invalid_argument("concentration_probe: trials must be >= 1");

  const double dist = (y - z).norm();
  const double y_sq = y.squaredNorm();
  const double z_sq = z.squaredNorm();
  const int n = static_cast<int>(y.size());

  // Per-trial |h_M(y) - h_M(z)| with a shared draw of M.
  const std::size_t chunks = (static_cast<std::size_t>(trials) + kChunk - 1) / kChunk;
  std::vector<std::vector<std::int64_t>> part_counts(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    std::vector<std::int64_t> counts(lambda_grid.size(), 0);
    const int lo = static_cast<int>(c) * kChunk;
    const int hi = std::min(trials, lo + kChunk);
    Vector row(n);
    for (int t = lo; t < hi; ++t) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
      double acc_y = 0.0, acc_z = 0.0;
      const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
      const double sphere_radius = std::sqrt(static_cast<double>(n) / static_cast<double>(m));
      for (int i = 0; i < m; ++i) {
        switch (kind) {
          case EnsembleKind::DenseGaussian:
            for (int j = 0; j < n; ++j) row[j] = rng.normal() * inv_sqrt_m;
            break;
          case EnsembleKind::DenseBernoulli:
            for (int j = 0; j < n; ++j) row[j] = rng.rademacher() * inv_sqrt_m;
            break;
          case EnsembleKind::SphereRows: {
            for (int j = 0; j < n; ++j) row[j] = rng.normal();
            row *= sphere_radius / row.norm();
            break;
          }
          case EnsembleKind::ExplicitMatrix:
            throw std::invalid_argument("concentration_probe: need a random ensemble kind");
        }
        const double dy = row.dot(y);
        const double dz = row.dot(z);
        acc_y += dy * dy;
        acc_z += dz * dz;
      }
      const double diff = std::abs((acc_y - y_sq) - (acc_z - z_sq));
      for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
        const double threshold = lambda_grid[g] * dist;
        // zero threshold (y = z): the increment is identically zero, count
        // only genuine exceedances
        if (threshold > 0.0 ? diff >= threshold : diff > 0.0) ++counts[g];
      }
    }
    part_counts[c] = std::move(counts);
  });

  ConcentrationResult res;
  res.trials = trials;
  res.seed = seed;
  for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
    ConcentrationRow row;
    row.lambda = lambda_grid[g];
    for (const auto& counts : part_counts) row.tail_count += counts[g];
    row.p_hat = static_cast<double>(row.tail_count) / trials;
    res.rows.push_back(row);
  }

  // Regression through the origin of -log(p/2) against m lambda^2 (and m
  // lambda for the subexponential tail). Grid points with too few tail events
  // are flagged and excluded. One refinement pass splits the grid at the
  // fitted c2/c1 crossover.
  auto fit_rate = [&](bool quadratic, double lambda_lo, double lambda_hi) {
    double su2 = 0.0, suw = 0.0;
    for (const auto& row : res.rows) {
      if (row.tail_count < res.min_tail_events) continue;
      if (row.lambda < lambda_lo || row.lambda > lambda_hi) continue;
      if (row.p_hat >= 1.0) continue;
      const double u = quadratic ? m * row.lambda * row.lambda : m * row.lambda;
      const double w = -std::log(row.p_hat / 2.0);
      su2 += u * u;
      suw += u * w;
    }
    return su2 > 0.0 ? suw / su2 : 0.0;
  };

  const double inf = std::numeric_limits<double>::infinity();
  double c1 = fit_rate(true, 0.0, inf);
  double c2 = fit_rate(false, 0.0, inf);
  double crossover = (c1 > 0.0 && c2 > 0.0) ? c2 / c1 : inf;
  if (std::isfinite(crossover)) {
    const double c1b = fit_rate(true, 0.0, crossover);
    const double c2b = fit_rate(false, crossover, inf);
    if (c1b > 0.0) c1 = c1b;
    if (c2b > 0.0) c2 = c2b;
    crossover = (c1 > 0.0 && c2 > 0.0) ? c2 / c1 : inf;
  }
  res.c1 = c1;
  res.c2 = c2;
  res.crossover = std::isfinite(crossover) ? crossover : 0.0;
  res.fit_ok = c1 > 0.0;
  for (auto& row : res.rows)
    row.included = row.tail_count >= res.min_tail_events && row.p_hat < 1.0 &&
                   (!std::isfinite(crossover) || row.lambda <= crossover);
  return res;
}

std::int64_t sufficient_m_general(double s, double alpha_s, double xi, double delta0, double c1,
                                  double c2, double c_abs) {
  if (!(delta0 > 0.0 && delta0 < 1.0)) throw std::domain_error("sufficient_m_general: delta0 in (0,1)");
  if (!(xi > 0.0 && xi < 1.0)) throw std::domain_error("sufficient_m_general: xi in (0,1)");
  if (!(alpha_s > 0.0 && alpha_s < 0.5)) throw std::domain_error("sufficient_m_general: alpha_S in (0,1/2)");
  if (!(s > 0.0)) throw std::domain_error("sufficient_m_general: s must be positive");
  if (!(c1 > 0.0 && c2 > 0.0)) throw std::domain_error("sufficient_m_general: c1, c2 must be positive");
  if (!(c_abs > 0.0)) throw std::domain_error("sufficient_m_general: C must be positive");
  const double bound = (1.0 / (delta0 * delta0)) * (c_abs / std::min(c1, c2)) *
                       std::max(s * std::log(1.0 / alpha_s), std::log(6.0 / xi));
  return static_cast<std::int64_t>(std::ceil(bound));
}

std::int64_t sufficient_m_levels(const LevelsModel& model, double c_abs) {
  if (!(c_abs > 0.0)) throw std::domain_error("sufficient_m_levels: C must be positive");
  const double J = static_cast<double>(model.level_count());
  double sum = 0.0;
  for (const auto& lv : model.levels) {
    const double k = static_cast<double>(lv.sparsity);
    if (k <= 0.0) continue;
    const double d = static_cast<double>(lv.structure.max_group_size());
    const double g = static_cast<double>(lv.structure.group_count());
    sum += k * d + k * std::log(3.0 * std::exp(1.0) * g / k);
  }
  return static_cast<std::int64_t>(std::ceil(c_abs * J * sum));
}

MeasureOp operator_from_json(const std::string& text, const std::string& origin,
                             int default_input_dim) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": JSON parse error: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("kind"))
    throw ConfigError(origin + ": operator spec needs \"kind\"");
  const EnsembleKind kind = parse_ensemble_kind(doc["kind"].get<std::string>());

  if (kind == EnsembleKind::ExplicitMatrix) {
    if (!doc.contains("matrix")) throw ConfigError(origin + ": explicit-matrix needs \"matrix\"");
    const auto& rows = doc["matrix"];
    if (!rows.is_array() || rows.empty()) throw ConfigError(origin + ": \"matrix\" must be a nonempty array");
    const std::size_t cols = rows[0].size();
    Matrix M(static_cast<int>(rows.size()), static_cast<int>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].is_array() || rows[i].size() != cols)
        throw ConfigError(origin + ": matrix rows must have equal length");
      for (std::size_t j = 0; j < cols; ++j) M(static_cast<int>(i), static_cast<int>(j)) = rows[i][j].get<double>();
    }
    return MeasureOp::explicit_matrix(std::move(M));
  }

  if (!doc.contains("m")) throw ConfigError(origin + ": operator spec needs \"m\"");
  const int m = doc["m"].get<int>();
  const std::uint64_t seed = doc.value("seed", 0ULL);

  if (doc.contains("compose_with_H")) {
    const SubspaceBasis H = load_subspace_json(doc["compose_with_H"].get<std::string>());
    MeasureOp inner = MeasureOp::dense(kind, m, H.dim(), seed);
    return MeasureOp::composed(std::move(inner), H);
  }
  int input_dim = doc.value("input_dim", default_input_dim);
  if (input_dim <= 0)
    throw ConfigError(origin + ": operator spec needs \"input_dim\" (no model to infer it from)");
  return MeasureOp::dense(kind, m, input_dim, seed);
}

MeasureOp load_operator_json(const std::string& path, int default_input_dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open operator file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return operator_from_json(ss.str(), path, default_input_dim);
}

}  // namespace lowdim
