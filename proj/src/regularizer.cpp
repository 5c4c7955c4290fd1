#include "lowdim/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lowdim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Regularizer Regularizer::l1(int dim) {
  if (dim <= 0) throw std::invalid_argument("Regularizer::l1: dim must be positive");
  Regularizer f;
  f.kind = Kind::L1;
  f.ambient_dim = dim;
  return f;
}

Regularizer Regularizer::group_levels(const LevelsModel& m, std::vector<double> w) {
  m.validate();
  if (w.size() != m.levels.size())
    throw std::invalid_argument("Regularizer::group_levels: one weight per level required");
  for (double wj : w)
    if (!(wj > 0.0)) throw std::invalid_argument("Regularizer::group_levels: weights must be positive");
  Regularizer f;
  f.kind = Kind::GroupLevels;
  f.model = m;
  f.ambient_dim = m.ambient_dim;
  f.weights = std::move(w);
  return f;
}

Regularizer Regularizer::adapted(const LevelsModel& m) {
  std::vector<double> w;
  for (const auto& lv : m.levels) {
    if (lv.sparsity < 1)
      throw std::invalid_argument("Regularizer::adapted: every level needs k_j >= 1");
    w.push_back(1.0 / std::sqrt(static_cast<double>(lv.sparsity)));
  }
  return group_levels(m, std::move(w));
}

Regularizer Regularizer::sigma(const LevelsModel& m, SigmaNormOpts opts) {
  m.validate();
  Regularizer f;
  f.kind = Kind::SigmaNorm;
  f.model = m;
  f.ambient_dim = m.ambient_dim;
  f.sigma_opts = opts;
  return f;
}

namespace {

double group_norm(const Vector& x, const std::vector<int>& g) {
  double s = 0.0;
  for (int i : g) s += x[i] * x[i];
  return std::sqrt(s);
}

std::vector<char> covered_mask(const LevelsModel& m) {
  std::vector<char> mask(static_cast<std::size_t>(m.ambient_dim), 0);
  for (const auto& lv : m.levels)
    for (const auto& g : lv.structure.groups)
      for (int i : g) mask[static_cast<std::size_t>(i)] = 1;
  return mask;
}

}  // namespace

double eval_f(const Regularizer& f, const Vector& x) {
  if (x.size() != f.dim()) throw std::invalid_argument("eval_f: dimension mismatch");
  switch (f.kind) {
    case Regularizer::Kind::L1:
      return x.lpNorm<1>();
    case Regularizer::Kind::GroupLevels: {
      const auto mask = covered_mask(f.model);
      for (int i = 0; i < x.size(); ++i)
        if (!mask[static_cast<std::size_t>(i)] && x[i] != 0.0) return kInf;
      double total = 0.0;
      for (std::size_t j = 0; j < f.model.levels.size(); ++j) {
        double level = 0.0;
        for (const auto& g : f.model.levels[j].structure.groups) level += group_norm(x, g);
        total += f.weights[j] * level;
      }
      return total;
    }
    case Regularizer::Kind::SigmaNorm:
      return sigma_norm_small(x, f.model, f.sigma_opts);
  }
  return 0.0;
}

Vector prox_f(const Regularizer& f, const Vector& z, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("prox_f: lambda must be nonnegative");
  if (z.size() != f.dim()) throw std::invalid_argument("prox_f: dimension mismatch");
  if (lambda == 0.0) return z;
  switch (f.kind) {
    case Regularizer::Kind::L1: {
      Vector out(z.size());
      for (int i = 0; i < z.size(); ++i)
        out[i] = std::copysign(std::max(0.0, std::abs(z[i]) - lambda), z[i]);
      return out;
    }
    case Regularizer::Kind::GroupLevels: {
      Vector out = Vector::Zero(z.size());
      for (std::size_t j = 0; j < f.model.levels.size(); ++j) {
        const double thr = lambda * f.weights[j];
        for (const auto& g : f.model.levels[j].structure.groups) {
          const double n = group_norm(z, g);
          if (n > thr) {
            const double scale = 1.0 - thr / n;
            for (int i : g) out[i] = scale * z[i];
          }
        }
      }
      return out;
    }
    case Regularizer::Kind::SigmaNorm:
      throw std::invalid_argument("prox_f: no proximal map for the enumerated sigma norm");
  }
  return z;
}

double dual_norm(const Regularizer& f, const Vector& u) {
  if (u.size() != f.dim()) throw std::invalid_argument("dual_norm: dimension mismatch");
  switch (f.kind) {
    case Regularizer::Kind::L1:
      return u.lpNorm<Eigen::Infinity>();
    case Regularizer::Kind::GroupLevels: {
      double worst = 0.0;
      for (std::size_t j = 0; j < f.model.levels.size(); ++j)
        for (const auto& g : f.model.levels[j].structure.groups)
          worst = std::max(worst, group_norm(u, g) / f.weights[j]);
      return worst;
    }
    case Regularizer::Kind::SigmaNorm: {
      // max over admissible supports of the restricted Euclidean norm:
      // per level the top-k_j group masses, summed across levels
      double acc = 0.0;
      for (const auto& lv : f.model.levels) {
        if (lv.sparsity <= 0) continue;
        std::vector<double> gmass;
        for (const auto& g : lv.structure.groups) {
          double m = 0.0;
          for (int i : g) m += u[i] * u[i];
          gmass.push_back(m);
        }
        std::sort(gmass.begin(), gmass.end(), std::greater<double>());
        for (int t = 0; t < std::min<int>(lv.sparsity, static_cast<int>(gmass.size())); ++t)
          acc += gmass[static_cast<std::size_t>(t)];
      }
      return std::sqrt(acc);
    }
  }
  return 0.0;
}

namespace {

// Waterfilling solution of min sum_g m_g^2/theta_g over 0 <= theta <= 1,
// sum_g theta_g <= k (the group-mass form of the k-support norm). Returns
// theta per group and the level norm squared.
struct LevelWaterfill {
  std::vector<double> theta;
  double norm_sq = 0.0;
};

LevelWaterfill waterfill_level(const std::vector<double>& masses, int k) {
  const int G = static_cast<int>(masses.size());
  LevelWaterfill out;
  out.theta.assign(static_cast<std::size_t>(G), 0.0);
  if (k <= 0 || G == 0) return out;
  k = std::min(k, G);

  std::vector<int> order(static_cast<std::size_t>(G));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return masses[static_cast<std::size_t>(a)] > masses[static_cast<std::size_t>(b)];
  });
  std::vector<double> sorted(static_cast<std::size_t>(G));
  for (int i = 0; i < G; ++i) sorted[static_cast<std::size_t>(i)] = masses[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
  std::vector<double> suffix(static_cast<std::size_t>(G) + 1, 0.0);
  for (int i = G - 1; i >= 0; --i)
    suffix[static_cast<std::size_t>(i)] = suffix[static_cast<std::size_t>(i) + 1] + sorted[static_cast<std::size_t>(i)];

  const double eps = 1e-14 * (1.0 + sorted[0]);
  int head = k - 1;
  double tau = suffix[static_cast<std::size_t>(k - 1)];
  for (int r = 0; r < k; ++r) {
    const int h = k - r - 1;  // groups kept at theta = 1
    const double mean = suffix[static_cast<std::size_t>(h)] / (r + 1);
    const double upper = h > 0 ? sorted[static_cast<std::size_t>(h - 1)]
                               : std::numeric_limits<double>::infinity();
    const double lower = h < G ? sorted[static_cast<std::size_t>(h)] : 0.0;
    if (upper > mean - eps && mean >= lower - eps) {
      head = h;
      tau = mean;
      break;
    }
  }

  for (int i = 0; i < G; ++i) {
    const int g = order[static_cast<std::size_t>(i)];
    if (i < head)
      out.theta[static_cast<std::size_t>(g)] = 1.0;
    else if (tau > 0.0)
      out.theta[static_cast<std::size_t>(g)] =
          std::min(1.0, sorted[static_cast<std::size_t>(i)] / tau);
  }
  for (int i = 0; i < head; ++i)
    out.norm_sq += sorted[static_cast<std::size_t>(i)] * sorted[static_cast<std::size_t>(i)];
  const double tail = suffix[static_cast<std::size_t>(head)];
  out.norm_sq += tau > 0.0 ? tail * tau : 0.0;  // tail^2/(r+1) with tau = tail/(r+1)
  return out;
}

}  // namespace

SigmaNormResult sigma_norm_certified(const Vector& v, const LevelsModel& model,
                                     SigmaNormOpts opts) {
  if (v.size() != model.ambient_dim)
    throw std::invalid_argument("sigma_norm: dimension mismatch");
  SigmaNormResult res;
  const double vnorm = v.norm();
  if (vnorm == 0.0) return res;

  // Desk-scale contract: refuse oversized atom enumerations up front.
  std::vector<int> k_counts;
  for (const auto& lv : model.levels) k_counts.push_back(lv.sparsity);
  if (count_model_supports(model, k_counts) > static_cast<double>(opts.budget))
    throw BudgetExceeded("sigma_norm: support enumeration exceeds budget " +
                         std::to_string(opts.budget));

  const int n = model.ambient_dim;
  std::vector<int> cover_count(static_cast<std::size_t>(n), 0);
  for (const auto& lv : model.levels)
    if (lv.sparsity > 0)
      for (const auto& g : lv.structure.groups)
        for (int i : g) ++cover_count[static_cast<std::size_t>(i)];

  // outside the span of the atoms -> +infinity
  const double span_tol = 1e-14 * (1.0 + vnorm);
  double off_mass = 0.0;
  for (int i = 0; i < n; ++i)
    if (cover_count[static_cast<std::size_t>(i)] == 0) off_mass += v[i] * v[i];
  if (std::sqrt(off_mass) > span_tol) {
    res.value = kInf;
    return res;
  }

  // Normalize: the gauge is positively homogeneous.
  const Vector target = v / vnorm;

  // Candidate solution from the partition-matroid waterfilling: theta gives
  // both a feasible latent decomposition (intervals below) and a dual point,
  // so the pair certifies itself by weak duality.
  std::vector<double> theta(static_cast<std::size_t>(n), 0.0);  // per coordinate
  double closed_sq = 0.0;
  for (const auto& lv : model.levels) {
    if (lv.sparsity <= 0) continue;
    std::vector<double> masses;
    for (const auto& g : lv.structure.groups) masses.push_back(group_norm(target, g));
    const LevelWaterfill wf = waterfill_level(masses, lv.sparsity);
    closed_sq += wf.norm_sq;
    for (std::size_t gi = 0; gi < lv.structure.groups.size(); ++gi)
      for (int i : lv.structure.groups[gi]) theta[static_cast<std::size_t>(i)] = wf.theta[gi];
  }
  const double closed_value = std::sqrt(closed_sq);

  // Dual candidate mu_i = t_i / (theta_i ||t||_Sigma); its gauge is the max
  // over admissible supports, computable as a per-level top-k sum.
  double lower_cf = 0.0;
  if (closed_value > 0.0) {
    Vector mu = Vector::Zero(n);
    for (int i = 0; i < n; ++i)
      if (theta[static_cast<std::size_t>(i)] > 0.0)
        mu[i] = target[i] / (theta[static_cast<std::size_t>(i)] * closed_value);
    double gauge_sq = 0.0;
    for (const auto& lv : model.levels) {
      if (lv.sparsity <= 0) continue;
      std::vector<double> gmass;
      for (const auto& g : lv.structure.groups) {
        double acc = 0.0;
        for (int i : g) acc += mu[i] * mu[i];
        gmass.push_back(acc);
      }
      std::sort(gmass.begin(), gmass.end(), std::greater<double>());
      for (int t = 0; t < std::min<int>(lv.sparsity, static_cast<int>(gmass.size())); ++t)
        gauge_sq += gmass[static_cast<std::size_t>(t)];
    }
    const double gauge = std::sqrt(gauge_sq);
    if (gauge > 0.0) lower_cf = target.dot(mu) / gauge;
  }

  // Feasible latent value of the theta decomposition: lay each level's
  // theta-intervals along [0,1) (wrapping); every u picks one admissible
  // support, and integrating the piecewise decomposition evaluates it.
  double piece_value = 0.0;
  {
    std::vector<double> breaks = {0.0, 1.0};
    std::vector<std::vector<std::pair<double, double>>> intervals;  // per level: (start, len) per group
    for (const auto& lv : model.levels) {
      std::vector<std::pair<double, double>> level_iv;
      double pos = 0.0;
      for (std::size_t gi = 0; gi < lv.structure.groups.size(); ++gi) {
        const double len = lv.sparsity > 0 ? theta[static_cast<std::size_t>(lv.structure.groups[gi][0])] : 0.0;
        level_iv.emplace_back(pos, len);
        if (len > 0.0) {
          breaks.push_back(pos - std::floor(pos));
          const double end = pos + len;
          breaks.push_back(end - std::floor(end));
        }
        pos += len;
      }
      intervals.push_back(std::move(level_iv));
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
      const double len = breaks[b + 1] - breaks[b];
      if (len <= 0.0) continue;
      const double u = 0.5 * (breaks[b] + breaks[b + 1]);
      double piece_sq = 0.0;
      for (std::size_t j = 0; j < model.levels.size(); ++j) {
        const auto& lv = model.levels[j];
        for (std::size_t gi = 0; gi < lv.structure.groups.size(); ++gi) {
          const auto& [start, glen] = intervals[j][gi];
          if (glen <= 0.0) continue;
          double rel = u - start;
          rel -= std::floor(rel);  // wrap into [0,1)
          if (rel < glen) {
            for (int i : lv.structure.groups[gi]) {
              const double ui = target[i] / theta[static_cast<std::size_t>(i)];
              piece_sq += ui * ui;
            }
          }
        }
      }
      piece_value += len * std::sqrt(piece_sq);
    }
  }

  double best_primal = piece_value > 0.0 ? piece_value : closed_value;
  if (opts.force_iterative) {
    best_primal = std::numeric_limits<double>::infinity();
    lower_cf = 0.0;
  } else if (best_primal - lower_cf <= opts.gap_tol * (1.0 + best_primal)) {
    res.value = best_primal * vnorm;
    res.gap = (best_primal - lower_cf) * vnorm;
    res.iterations = 0;
    return res;
  }

  // Fallback: Douglas-Rachford on the enumerated latent decomposition.
  const auto supports = enumerate_maximal_supports(model, opts.budget);
  const std::size_t K = supports.size();
  std::vector<int> multiplicity(static_cast<std::size_t>(n), 0);  // E E^T diagonal
  for (const auto& s : supports)
    for (int i : s) ++multiplicity[static_cast<std::size_t>(i)];

  // One latent block per support; flat storage.
  std::vector<std::size_t> offset(K + 1, 0);
  for (std::size_t s = 0; s < K; ++s) offset[s + 1] = offset[s] + supports[s].size();
  const std::size_t total = offset[K];

  std::vector<double> p(total), x(total), y(total), nu(total);
  // start from the averaged feasible decomposition
  for (std::size_t s = 0; s < K; ++s)
    for (std::size_t c = 0; c < supports[s].size(); ++c) {
      const int i = supports[s][c];
      p[offset[s] + c] = target[i] / multiplicity[static_cast<std::size_t>(i)];
    }

  Vector residual(n);
  const double gamma = opts.step;

  auto project_affine = [&](const std::vector<double>& in, std::vector<double>& out) {
    residual = target;
    for (std::size_t s = 0; s < K; ++s)
      for (std::size_t c = 0; c < supports[s].size(); ++c)
        residual[supports[s][c]] -= in[offset[s] + c];
    for (std::size_t s = 0; s < K; ++s)
      for (std::size_t c = 0; c < supports[s].size(); ++c) {
        const int i = supports[s][c];
        out[offset[s] + c] = in[offset[s] + c] + residual[i] / multiplicity[static_cast<std::size_t>(i)];
      }
  };

  double primal = kInf;
  for (int it = 1; it <= opts.max_iter; ++it) {
    project_affine(p, x);
    // y = blockwise shrink of (2x - p); nu = ((2x - p) - y) / gamma
    for (std::size_t s = 0; s < K; ++s) {
      double nsq = 0.0;
      for (std::size_t c = offset[s]; c < offset[s + 1]; ++c) {
        const double w = 2.0 * x[c] - p[c];
        y[c] = w;
        nsq += w * w;
      }
      const double nw = std::sqrt(nsq);
      const double scale = nw > gamma ? 1.0 - gamma / nw : 0.0;
      for (std::size_t c = offset[s]; c < offset[s + 1]; ++c) {
        const double w = y[c];
        y[c] = scale * w;
        nu[c] = (w - y[c]) / gamma;
      }
    }
    for (std::size_t c = 0; c < total; ++c) p[c] += y[c] - x[c];

    if (it % 25 == 0 || it == opts.max_iter) {
      primal = 0.0;
      for (std::size_t s = 0; s < K; ++s) {
        double nsq = 0.0;
        for (std::size_t c = offset[s]; c < offset[s + 1]; ++c) nsq += x[c] * x[c];
        primal += std::sqrt(nsq);
      }
      // consistent dual vector: average the block subgradients per coordinate
      Vector mu = Vector::Zero(n);
      for (std::size_t s = 0; s < K; ++s)
        for (std::size_t c = 0; c < supports[s].size(); ++c)
          mu[supports[s][c]] += nu[offset[s] + c];
      for (int i = 0; i < n; ++i)
        if (multiplicity[static_cast<std::size_t>(i)] > 0)
          mu[i] /= multiplicity[static_cast<std::size_t>(i)];
      double dual_gauge = 0.0;
      for (const auto& s : supports) {
        double acc = 0.0;
        for (int i : s) acc += mu[i] * mu[i];
        dual_gauge = std::max(dual_gauge, std::sqrt(acc));
      }
      const double lower =
          std::max(lower_cf, dual_gauge > 0.0 ? target.dot(mu) / dual_gauge : 0.0);
      const double upper = std::min(primal, best_primal);
      const double gap = upper - lower;
      if (gap <= opts.gap_tol * (1.0 + upper)) {
        res.value = upper * vnorm;
        res.gap = gap * vnorm;
        res.iterations = it;
        return res;
      }
    }
  }
  throw std::runtime_error("sigma_norm: no duality-gap certificate after " +
                           std::to_string(opts.max_iter) + " iterations (primal " +
                           std::to_string(primal * vnorm) + ")");
}

double sigma_norm_small(const Vector& v, const LevelsModel& model, SigmaNormOpts opts) {
  return sigma_norm_certified(v, model, opts).value;
}

double anorm(const Vector& x, const MeasureOp& A, double C) {
  if (C < 0.0) throw std::invalid_argument("anorm: C must be nonnegative");
  return C * A.apply(x).norm() + x.norm();
}

double estimate_anorm_ratio(const MeasureOp& A, double C, const Regularizer& f, int probes,
                            std::uint64_t seed) {
  if (probes < 1) throw std::invalid_argument("estimate_anorm_ratio: probes must be >= 1");
  if (A.input_dim() != f.dim())
    throw std::invalid_argument("estimate_anorm_ratio: operator/regularizer dimension mismatch");
  std::vector<int> span;
  if (f.kind == Regularizer::Kind::L1) {
    span.resize(static_cast<std::size_t>(f.dim()));
    std::iota(span.begin(), span.end(), 0);
  } else {
    span = f.model.covered_indices();
  }
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < probes; ++t) {
    Vector u = Vector::Zero(f.dim());
    for (int i : span) u[i] = rng.normal();
    const double fu = eval_f(f, u);
    if (!(fu > 0.0) || std::isinf(fu)) continue;
    worst = std::max(worst, anorm(u, A, C) / fu);
  }
  return worst;
}

double dist_f(const Vector& x, const LevelsModel& model, const Regularizer& f) {
  if (x.size() != model.ambient_dim || x.size() != f.dim())
    throw std::invalid_argument("dist_f: dimension mismatch");
  if (f.kind == Regularizer::Kind::SigmaNorm)
    throw std::invalid_argument("dist_f: only the separable kinds are supported");

  // Greedy f-best support: per level keep the k_j groups with the largest
  // f-mass. Exact for separable f by rearrangement.
  Vector kept = Vector::Zero(x.size());
  for (const auto& lv : model.levels) {
    const int G = lv.structure.group_count();
    std::vector<int> order(static_cast<std::size_t>(G));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> score(static_cast<std::size_t>(G));
    for (int gi = 0; gi < G; ++gi) {
      Vector restricted = Vector::Zero(x.size());
      for (int i : lv.structure.groups[static_cast<std::size_t>(gi)]) restricted[i] = x[i];
      score[static_cast<std::size_t>(gi)] = eval_f(f, restricted);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
    });
    for (int r = 0; r < std::min(lv.sparsity, G); ++r)
      for (int i : lv.structure.groups[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])])
        kept[i] = x[i];
  }
  return eval_f(f, x - kept);
}

StabilityConstants stability_constants(int J, const std::vector<int>& k, double delta) {
  if (J < 1) throw std::invalid_argument("stability_constants: J must be >= 1");
  if (static_cast<int>(k.size()) != J)
    throw std::invalid_argument("stability_constants: need one sparsity per level");
  if (delta < 0.0) throw std::invalid_argument("stability_constants: delta must be >= 0");
  StabilityConstants sc;
  sc.J = J;
  sc.k = k;
  sc.delta = delta;
  if (J == 1) {
    sc.delta0 = 1.0 / std::sqrt(2.0);
    if (delta >= sc.delta0)
      throw std::domain_error("stability_constants: delta >= 1/sqrt(2), constants blow up");
    if (k[0] < 1) throw std::invalid_argument("stability_constants: k must be >= 1");
    sc.C = 2.0 * std::sqrt(1.0 + delta) / (1.0 - delta * std::sqrt(2.0));
    sc.D = 2.0 * (1.0 + std::sqrt(1.0 + delta) * sc.C) / std::sqrt(static_cast<double>(k[0]));
  } else {
    sc.delta0 = 1.0 / std::sqrt(2.0 + static_cast<double>(J));
    if (delta >= sc.delta0)
      throw std::domain_error("stability_constants: delta >= 1/sqrt(2+J), constants blow up");
    sc.C = (1.0 + std::sqrt(1.0 + static_cast<double>(J))) * std::sqrt(1.0 + delta) /
           (1.0 - delta * std::sqrt(2.0 + static_cast<double>(J)));
    sc.D = 2.0 * std::sqrt(2.0) * (1.0 + std::sqrt(1.0 + delta) * sc.C);
  }
  return sc;
}

}  // namespace lowdim
