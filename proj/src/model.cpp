#include "lowdim/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace lowdim {

using nlohmann::json;

int GroupStructure::max_group_size() const {
  std::size_t d = 0;
  for (const auto& g : groups) d = std::max(d, g.size());
  return static_cast<int>(d);
}

void GroupStructure::validate() const {
  if (ambient_dim <= 0) throw ConfigError("group structure: ambient_dim must be positive");
  std::vector<char> seen(static_cast<std::size_t>(ambient_dim), 0);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    if (g.empty())
      throw ConfigError("group structure: group " + std::to_string(gi) + " is empty");
    for (int i : g) {
      if (i < 0 || i >= ambient_dim)
        throw ConfigError("group structure: index " + std::to_string(i) + " in group " +
                          std::to_string(gi) + " outside [0," + std::to_string(ambient_dim) + ")");
      if (seen[static_cast<std::size_t>(i)])
        throw ConfigError("group structure: index " + std::to_string(i) +
                          " appears in more than one group");
      seen[static_cast<std::size_t>(i)] = 1;
    }
  }
}

void LevelsModel::validate() const {
  if (ambient_dim <= 0) throw ConfigError("model: ambient_dim must be positive");
  std::vector<char> seen(static_cast<std::size_t>(ambient_dim), 0);
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const Level& lv = levels[j];
    if (lv.structure.ambient_dim != ambient_dim)
      throw ConfigError("model: level " + std::to_string(j) + " ambient_dim mismatch");
    lv.structure.validate();
    if (lv.sparsity < 0 || lv.sparsity > lv.structure.group_count())
      throw ConfigError("model: level " + std::to_string(j) + " sparsity k=" +
                        std::to_string(lv.sparsity) + " outside [0," +
                        std::to_string(lv.structure.group_count()) + "]");
    for (const auto& g : lv.structure.groups)
      for (int i : g) {
        if (seen[static_cast<std::size_t>(i)])
          throw ConfigError("model: coordinate " + std::to_string(i) +
                            " shared between levels (blocks must be disjoint)");
        seen[static_cast<std::size_t>(i)] = 1;
      }
  }
}

std::vector<int> LevelsModel::covered_indices() const {
  std::vector<int> out;
  for (const auto& lv : levels)
    for (const auto& g : lv.structure.groups) out.insert(out.end(), g.begin(), g.end());
  std::sort(out.begin(), out.end());
  return out;
}

LevelsModel LevelsModel::doubled() const {
  LevelsModel m = *this;
  for (auto& lv : m.levels)
    lv.sparsity = std::min(2 * lv.sparsity, lv.structure.group_count());
  return m;
}

LevelsModel LevelsModel::plain_sparse(int n, int k) {
  LevelsModel m;
  m.ambient_dim = n;
  GroupStructure G;
  G.ambient_dim = n;
  G.groups.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) G.groups[static_cast<std::size_t>(i)] = {i};
  m.levels.push_back({std::move(G), k});
  m.validate();
  return m;
}

double default_support_tol(const Vector& x) { return 1e-12 * x.norm(); }

namespace {

double resolve_tol(const Vector& x, double tol) {
  return tol < 0.0 ? default_support_tol(x) : tol;
}

double group_norm_sq(const Vector& x, const std::vector<int>& g) {
  double s = 0.0;
  for (int i : g) s += x[i] * x[i];
  return s;
}

}  // namespace

std::vector<int> group_support(const Vector& x, const GroupStructure& G, double tol) {
  if (x.size() != G.ambient_dim)
    throw std::invalid_argument("group_support: dimension mismatch (vector " +
                                std::to_string(x.size()) + ", structure " +
                                std::to_string(G.ambient_dim) + ")");
  const double t = resolve_tol(x, tol);
  std::vector<int> out;
  for (int gi = 0; gi < G.group_count(); ++gi)
    if (std::sqrt(group_norm_sq(x, G.groups[static_cast<std::size_t>(gi)])) > t) out.push_back(gi);
  return out;
}

bool is_member(const Vector& x, const LevelsModel& model, double tol) {
  if (x.size() != model.ambient_dim)
    throw std::invalid_argument("is_member: dimension mismatch");
  const double t = resolve_tol(x, tol);
  std::vector<char> covered(static_cast<std::size_t>(model.ambient_dim), 0);
  for (const auto& lv : model.levels) {
    int active = 0;
    for (const auto& g : lv.structure.groups) {
      if (std::sqrt(group_norm_sq(x, g)) > t) ++active;
      for (int i : g) covered[static_cast<std::size_t>(i)] = 1;
    }
    if (active > lv.sparsity) return false;
  }
  for (int i = 0; i < model.ambient_dim; ++i)
    if (!covered[static_cast<std::size_t>(i)] && std::abs(x[i]) > t) return false;
  return true;
}

Vector best_model_approx(const Vector& x, const LevelsModel& model) {
  if (x.size() != model.ambient_dim)
    throw std::invalid_argument("best_model_approx: dimension mismatch");
  Vector out = Vector::Zero(x.size());
  for (const auto& lv : model.levels) {
    const int G = lv.structure.group_count();
    std::vector<int> order(static_cast<std::size_t>(G));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> mass(static_cast<std::size_t>(G));
    for (int gi = 0; gi < G; ++gi)
      mass[static_cast<std::size_t>(gi)] =
          group_norm_sq(x, lv.structure.groups[static_cast<std::size_t>(gi)]);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return mass[static_cast<std::size_t>(a)] > mass[static_cast<std::size_t>(b)];
    });
    const int keep = std::min(lv.sparsity, G);
    for (int r = 0; r < keep; ++r)
      for (int i : lv.structure.groups[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])])
        out[i] = x[i];
  }
  return out;
}

Vector sample_model(const LevelsModel& model, Rng& rng, MagnitudeLaw law) {
  Vector out = Vector::Zero(model.ambient_dim);
  for (const auto& lv : model.levels) {
    const auto chosen = rng.sample_without_replacement(lv.structure.group_count(), lv.sparsity);
    for (int gi : chosen)
      for (int i : lv.structure.groups[static_cast<std::size_t>(gi)]) {
        switch (law) {
          case MagnitudeLaw::Gaussian: out[i] = rng.normal(); break;
          case MagnitudeLaw::Rademacher: out[i] = rng.rademacher(); break;
          case MagnitudeLaw::Uniform: out[i] = 2.0 * rng.uniform() - 1.0; break;
        }
      }
  }
  return out;
}

Vector sample_model(const LevelsModel& model, std::uint64_t seed, MagnitudeLaw law) {
  Rng rng(seed);
  return sample_model(model, rng, law);
}

Vector sample_secant(const LevelsModel& model, Rng& rng) {
  for (;;) {
    const Vector x = sample_model(model, rng);
    const Vector xp = sample_model(model, rng);
    Vector d = x - xp;
    const double n = d.norm();
    if (n > 1e-300) return d / n;
  }
}

Vector sample_secant(const LevelsModel& model, std::uint64_t seed) {
  Rng rng(seed);
  return sample_secant(model, rng);
}

SecantSampler make_secant_sampler(const LevelsModel& model, std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [model, rng]() { return sample_secant(model, *rng); };
}

namespace {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 0; i < k; ++i) r = r * static_cast<double>(n - i) / static_cast<double>(i + 1);
  return r;
}

std::vector<std::vector<int>> combinations(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> c(static_cast<std::size_t>(k));
  std::iota(c.begin(), c.end(), 0);
  if (k == 0) {
    out.push_back({});
    return out;
  }
  for (;;) {
    out.push_back(c);
    int i = k - 1;
    while (i >= 0 && c[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++c[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j)
      c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
  }
  return out;
}

}  // namespace

double count_model_supports(const LevelsModel& model, const std::vector<int>& counts) {
  if (counts.size() != model.levels.size())
    throw std::invalid_argument("count_model_supports: counts size mismatch");
  double total = 1.0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const int G = model.levels[j].structure.group_count();
    total *= binomial(G, std::min(counts[j], G));
  }
  return total;
}

std::vector<std::vector<int>> enumerate_model_supports(const LevelsModel& model,
                                                       const std::vector<int>& counts,
                                                       std::size_t budget) {
  const double total = count_model_supports(model, counts);
  if (total > static_cast<double>(budget))
    throw BudgetExceeded("support enumeration needs " + std::to_string(total) +
                         " combinations, budget is " + std::to_string(budget));

  std::vector<std::vector<std::vector<int>>> per_level;  // [level][combo] -> coord indices
  for (std::size_t j = 0; j < model.levels.size(); ++j) {
    const auto& lv = model.levels[j];
    const int t = std::min(counts[j], lv.structure.group_count());
    std::vector<std::vector<int>> level_sets;
    for (const auto& combo : combinations(lv.structure.group_count(), t)) {
      std::vector<int> coords;
      for (int gi : combo) {
        const auto& g = lv.structure.groups[static_cast<std::size_t>(gi)];
        coords.insert(coords.end(), g.begin(), g.end());
      }
      std::sort(coords.begin(), coords.end());
      level_sets.push_back(std::move(coords));
    }
    per_level.push_back(std::move(level_sets));
  }

  std::vector<std::vector<int>> out;
  std::vector<std::size_t> pos(per_level.size(), 0);
  for (;;) {
    std::vector<int> support;
    for (std::size_t j = 0; j < per_level.size(); ++j) {
      const auto& s = per_level[j][pos[j]];
      support.insert(support.end(), s.begin(), s.end());
    }
    std::sort(support.begin(), support.end());
    out.push_back(std::move(support));
    // odometer increment, last level fastest
    std::size_t j = per_level.size();
    for (;;) {
      if (j == 0) return out;
      --j;
      if (++pos[j] < per_level[j].size()) break;
      pos[j] = 0;
    }
  }
}

std::vector<std::vector<int>> enumerate_maximal_supports(const LevelsModel& model,
                                                         std::size_t budget) {
  std::vector<int> counts;
  for (const auto& lv : model.levels) counts.push_back(lv.sparsity);
  return enumerate_model_supports(model, counts, budget);
}

namespace {

int line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

int require_int(const json& j, const std::string& where) {
  if (!j.is_number_integer())
    throw ConfigError(where + ": expected an integer, got " + std::string(j.type_name()));
  return j.get<int>();
}

}  // namespace

LevelsModel parse_model_json(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ":" + std::to_string(line_of_offset(text, e.byte)) +
                      ": JSON parse error: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(origin + ": model file must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (key != "ambient_dim" && key != "levels")
      throw ConfigError(origin + ": unknown key \"" + key + "\"");
  }
  if (!doc.contains("ambient_dim")) throw ConfigError(origin + ": missing \"ambient_dim\"");
  if (!doc.contains("levels")) throw ConfigError(origin + ": missing \"levels\"");

  LevelsModel m;
  m.ambient_dim = require_int(doc["ambient_dim"], origin + ": ambient_dim");
  const json& levels = doc["levels"];
  if (!levels.is_array()) throw ConfigError(origin + ": \"levels\" must be an array");
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const std::string where = origin + ": levels[" + std::to_string(j) + "]";
    const json& lj = levels[j];
    if (!lj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : lj.items()) {
      (void)value;
      if (key != "groups" && key != "k") throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
    if (!lj.contains("groups") || !lj.contains("k"))
      throw ConfigError(where + ": needs \"groups\" and \"k\"");
    LevelsModel::Level lv;
    lv.structure.ambient_dim = m.ambient_dim;
    if (!lj["groups"].is_array()) throw ConfigError(where + ".groups: expected an array");
    for (std::size_t gi = 0; gi < lj["groups"].size(); ++gi) {
      const json& gj = lj["groups"][gi];
      if (!gj.is_array())
        throw ConfigError(where + ".groups[" + std::to_string(gi) + "]: expected an array");
      std::vector<int> g;
      for (std::size_t ii = 0; ii < gj.size(); ++ii)
        g.push_back(require_int(gj[ii], where + ".groups[" + std::to_string(gi) + "][" +
                                            std::to_string(ii) + "]"));
      lv.structure.groups.push_back(std::move(g));
    }
    lv.sparsity = require_int(lj["k"], where + ".k");
    m.levels.push_back(std::move(lv));
  }
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return m;
}

LevelsModel load_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model_json(ss.str(), path);
}

std::string model_to_json(const LevelsModel& model) {
  json doc;
  doc["ambient_dim"] = model.ambient_dim;
  doc["levels"] = json::array();
  for (const auto& lv : model.levels) {
    json lj;
    lj["groups"] = lv.structure.groups;
    lj["k"] = lv.sparsity;
    doc["levels"].push_back(lj);
  }
  return doc.dump(2);
}

}  // namespace lowdim
