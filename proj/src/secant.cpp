#include "lowdim/secant.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace lowdim {

using nlohmann::json;

FarthestPointSequence farthest_point_sequence(const std::vector<Vector>& samples,
                                              double stop_radius) {
  if (samples.empty()) throw std::invalid_argument("farthest_point_sequence: no samples");
  const std::size_t n = samples.size();
  FarthestPointSequence seq;
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());

  int current = 0;  // first center: first sample, deterministic
  for (;;) {
    seq.order.push_back(current);
    double worst = 0.0;
    int worst_idx = -1;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (samples[i] - samples[static_cast<std::size_t>(current)]).norm();
      if (d < dist[i]) dist[i] = d;
      if (dist[i] > worst) {  // strict: ties keep the smallest index
        worst = dist[i];
        worst_idx = static_cast<int>(i);
      }
    }
    seq.radii.push_back(worst);
    if (worst_idx < 0 || worst <= stop_radius) break;
    current = worst_idx;
  }
  return seq;
}

CoverResult greedy_cover(const std::vector<Vector>& samples, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("greedy_cover: alpha must be positive");
  if (samples.empty()) throw std::invalid_argument("greedy_cover: no samples");
  const FarthestPointSequence seq = farthest_point_sequence(samples, alpha);
  CoverResult out;
  out.radius = alpha;
  out.samples_used = static_cast<int>(samples.size());
  for (std::size_t i = 0; i < seq.order.size(); ++i) {
    out.center_indices.push_back(seq.order[i]);
    out.centers.push_back(samples[static_cast<std::size_t>(seq.order[i])]);
    if (seq.radii[i] <= alpha) break;
  }
  return out;
}

namespace {

struct LineFit {
  double slope = 0.0, intercept = 0.0, r2 = 1.0, sst = 0.0;
};

LineFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys,
                      std::size_t begin, std::size_t end) {
  const double n = static_cast<double>(end - begin);
  double sx = 0, sy = 0;
  for (std::size_t i = begin; i < end; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = begin; i < end; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  LineFit f;
  f.sst = syy;
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (syy > 0.0) {
    double ssr = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double e = ys[i] - (f.intercept + f.slope * xs[i]);
      ssr += e * e;
    }
    f.r2 = 1.0 - ssr / syy;
  }
  return f;
}

}  // namespace

BoxDimEstimate estimate_boxdim_cloud(const std::vector<Vector>& cloud,
                                     const std::vector<double>& alpha_grid, double r2_min) {
  if (alpha_grid.size() < 4)
    throw std::invalid_argument("estimate_boxdim: need at least 4 grid radii");
  for (std::size_t i = 0; i + 1 < alpha_grid.size(); ++i)
    if (!(alpha_grid[i] > alpha_grid[i + 1]) || alpha_grid[i + 1] <= 0.0)
      throw std::invalid_argument("estimate_boxdim: grid must be strictly decreasing and positive");

  BoxDimEstimate est;
  est.alphas = alpha_grid;
  const FarthestPointSequence seq = farthest_point_sequence(cloud, alpha_grid.back());
  for (double a : alpha_grid) {
    // count = first prefix of centers whose covering radius is <= a
    int count = static_cast<int>(seq.radii.size());
    for (std::size_t i = 0; i < seq.radii.size(); ++i)
      if (seq.radii[i] <= a) {
        count = static_cast<int>(i) + 1;
        break;
      }
    est.counts.push_back(count);
  }

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    xs.push_back(std::log(1.0 / alpha_grid[i]));
    ys.push_back(std::log(static_cast<double>(est.counts[i])));
  }

  const bool all_equal = std::all_of(est.counts.begin(), est.counts.end(),
                                     [&](int c) { return c == est.counts.front(); });
  if (all_equal) {
    est.status = BoxDimEstimate::Status::DegenerateFit;
    est.slope = 0.0;
    est.intercept = ys.front();
    est.r2 = 0.0;
    est.alpha_s = 0.0;
    return est;
  }

  // Largest alpha whose suffix window [i, end) fits a line with R^2 >= r2_min.
  const std::size_t n = xs.size();
  const std::size_t min_window = 4;
  bool found = false;
  for (std::size_t i = 0; i + min_window <= n; ++i) {
    const LineFit f = least_squares(xs, ys, i, n);
    if (f.sst > 0.0 && f.r2 >= r2_min) {
      est.slope = f.slope;
      est.intercept = f.intercept;
      est.r2 = f.r2;
      est.alpha_s = alpha_grid[i];
      found = true;
      break;
    }
  }
  if (!found) {
    const LineFit f = least_squares(xs, ys, 0, n);
    est.slope = f.slope;
    est.intercept = f.intercept;
    est.r2 = f.r2;
    est.alpha_s = 0.0;
    est.status = BoxDimEstimate::Status::NoLinearRegime;
  }
  return est;
}

BoxDimEstimate estimate_boxdim(const SecantSampler& sampler, const std::vector<double>& alpha_grid,
                               int samples, double r2_min) {
  if (samples < 1) throw std::invalid_argument("estimate_boxdim: samples must be >= 1");
  std::vector<Vector> cloud;
  cloud.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) cloud.push_back(sampler());
  return estimate_boxdim_cloud(cloud, alpha_grid, r2_min);
}

SubspaceBasis build_subspace(const std::vector<Vector>& spanning) {
  if (spanning.empty()) throw std::invalid_argument("build_subspace: no spanning vectors");
  const int n = static_cast<int>(spanning.front().size());
  Matrix C(n, static_cast<int>(spanning.size()));
  for (std::size_t i = 0; i < spanning.size(); ++i) {
    if (spanning[i].size() != n)
      throw std::invalid_argument("build_subspace: inconsistent vector dimensions");
    C.col(static_cast<int>(i)) = spanning[i];
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(C);
  qr.setThreshold(1e-10);
  const int d = static_cast<int>(qr.rank());
  SubspaceBasis H;
  Matrix Q = qr.householderQ() * Matrix::Identity(n, std::min<int>(n, static_cast<int>(C.cols())));
  H.basis = Q.leftCols(d);
  return H;
}

SubspaceBasis build_subspace(const CoverResult& cover) { return build_subspace(cover.centers); }

double certify_projection(const SubspaceBasis& H, const std::vector<Vector>& secants) {
  double worst = 0.0;
  for (const Vector& z : secants) {
    const double zn = z.norm();
    const double pn = H.project_coords(z).norm();
    if (pn > zn * (1.0 + 1e-10))
      throw std::runtime_error("certify_projection: contraction violated, basis not orthonormal");
    if (zn == 0.0) continue;
    worst = std::max(worst, 1.0 - pn / zn);
  }
  return std::min(1.0, std::max(0.0, worst));
}

double certify_projection(const SubspaceBasis& H, const SecantSampler& sampler, int trials) {
  if (trials < 1) throw std::invalid_argument("certify_projection: trials must be >= 1");
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Vector z = sampler();
    const double zn = z.norm();
    const double pn = H.project_coords(z).norm();
    if (pn > zn * (1.0 + 1e-10))
      throw std::runtime_error("certify_projection: contraction violated, basis not orthonormal");
    if (zn == 0.0) continue;
    worst = std::max(worst, 1.0 - pn / zn);
  }
  return std::min(1.0, std::max(0.0, worst));
}

SubspaceBasis parse_subspace_json(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": JSON parse error: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("ambient_dim") || !doc.contains("basis"))
    throw ConfigError(origin + ": subspace file needs \"ambient_dim\" and \"basis\"");
  const int n = doc["ambient_dim"].get<int>();
  const auto& cols = doc["basis"];
  if (!cols.is_array() || cols.empty()) throw ConfigError(origin + ": \"basis\" must be a nonempty array");
  SubspaceBasis H;
  H.basis.resize(n, static_cast<int>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (!cols[c].is_array() || static_cast<int>(cols[c].size()) != n)
      throw ConfigError(origin + ": basis column " + std::to_string(c) + " has wrong length");
    for (int i = 0; i < n; ++i) H.basis(i, static_cast<int>(c)) = cols[c][static_cast<std::size_t>(i)].get<double>();
  }
  // orthonormality to 1e-10
  const Matrix gram = H.basis.transpose() * H.basis;
  if ((gram - Matrix::Identity(H.dim(), H.dim())).cwiseAbs().maxCoeff() > 1e-10)
    throw ConfigError(origin + ": basis columns are not orthonormal");
  return H;
}

SubspaceBasis load_subspace_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open subspace file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_subspace_json(ss.str(), path);
}

std::string subspace_to_json(const SubspaceBasis& H) {
  json doc;
  doc["ambient_dim"] = H.ambient_dim();
  doc["basis"] = json::array();
  for (int c = 0; c < H.dim(); ++c) {
    json col = json::array();
    for (int i = 0; i < H.ambient_dim(); ++i) col.push_back(H.basis(i, c));
    doc["basis"].push_back(col);
  }
  return doc.dump();
}

}  // namespace lowdim
