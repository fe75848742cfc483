#include "q3dw/bench.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#ifndef Q3DW_PRESET_DIR
#define Q3DW_PRESET_DIR "presets"
#endif

namespace q3dw::bench {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> known_keys = {
    "run.solver",          "run.problem",       "run.output",         "basis.n",
    "basis.j",             "basis.jmin",        "basis.jmax",         "time.dt",
    "time.steps",          "adapt.tol_u",       "adapt.fact",         "adapt.n_keep",
    "adapt.start_full",    "problem.length",    "problem.lambda",     "problem.cv",
    "problem.sigma",       "source.qmax",       "source.zq",          "source.sigma",
    "source.region",       "source.theta0",     "material.lambda_z",  "material.cv_z",
    "mesh.path",           "output.grid_points", "output.quad_depth", "output.samples",
    "output.profile_points", "output.cross_section_z", "sweep.key",   "sweep.values",
    "sweep.meshes"};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

class Reader {
 public:
  explicit Reader(const Entries& e) : e_(e) {}

  const std::string* find(const std::string& key) const {
    auto it = e_.find(key);
    return it == e_.end() ? nullptr : &it->second;
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    const auto* v = find(key);
    return v ? *v : fallback;
  }
  double num(const std::string& key, double fallback) const {
    const auto* v = find(key);
    return v ? to_double(key, *v) : fallback;
  }
  int integer(const std::string& key, int fallback) const {
    const auto* v = find(key);
    return v ? to_int(key, *v) : fallback;
  }
  std::optional<int> opt_int(const std::string& key) const {
    const auto* v = find(key);
    return v ? std::optional<int>(to_int(key, *v)) : std::nullopt;
  }
  bool flag(const std::string& key, bool fallback) const {
    const auto* v = find(key);
    return v ? to_bool(key, *v) : fallback;
  }

 private:
  const Entries& e_;
};

// material.<name> or the common value of material.<name>.<region>.
double separable_factor(const Entries& e, const std::string& name) {
  const std::string key = "material." + name;
  std::optional<double> value;
  if (auto it = e.find(key); it != e.end()) value = to_double(key, it->second);
  for (auto it = e.lower_bound(key + "."); it != e.end() && it->first.rfind(key + ".", 0) == 0; ++it) {
    const double v = to_double(it->first, it->second);
    if (value && *value != v)
      throw ConfigError(it->first + " differs from other regions: the longitudinal factor must be the same in every "
                        "region; homogenize " + name + " or fold the region dependence into the mesh materials");
    value = v;
  }
  return value.value_or(1.0);
}

}  // namespace

Entries parse_ini(const std::string& text, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  Entries out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(source + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : body) out[section + "." + key] = trim(value.data());
  }
  return out;
}

RunConfig make_config(const Entries& entries, const fs::path& base_dir, const std::string& name) {
  const Reader r(entries);
  for (const auto& [key, value] : entries) {
    if (known_keys.count(key) || key.rfind("probes.", 0) == 0 || key.rfind("material.lambda_z.", 0) == 0 ||
        key.rfind("material.cv_z.", 0) == 0)
      continue;
    throw ConfigError("unknown key '" + key + "'");
  }

  RunConfig c;
  c.name = name;
  c.entries = entries;
  c.base_dir = base_dir;

  c.solver = r.str("run.solver", "");
  if (c.solver.empty()) throw ConfigError("run.solver is required (ssm, arm, q3d or aq3d)");
  if (c.solver != "ssm" && c.solver != "arm" && c.solver != "q3d" && c.solver != "aq3d")
    throw ConfigError("run.solver: unknown solver '" + c.solver + "'");
  const auto* problem = r.find("run.problem");
  if (!problem) throw ConfigError("run.problem is required");
  c.problem = parse_problem(*problem);
  const bool problem_3d = c.problem == ProblemId::cos_sin_3d || c.problem == ProblemId::rutherford;
  if (problem_3d != c.is_3d())
    throw ConfigError("problem " + *problem + " cannot be solved with solver " + c.solver);
  c.output = r.str("run.output", "out/" + name);

  c.n = r.integer("basis.n", 6);
  if (c.n < 1) throw ConfigError("basis.n must be positive");
  c.j = r.opt_int("basis.j");
  c.jmin = r.opt_int("basis.jmin");
  c.jmax = r.opt_int("basis.jmax");
  if (c.is_adaptive()) {
    if (!c.jmin || !c.jmax) throw ConfigError("basis.jmin and basis.jmax are required for solver " + c.solver);
    if (*c.jmin > *c.jmax) throw ConfigError("basis.jmin must not exceed basis.jmax");
  } else if (!c.j) {
    throw ConfigError("basis.j is required for solver " + c.solver);
  }

  if (!r.find("time.dt")) throw ConfigError("time.dt is required");
  c.dt = r.num("time.dt", 0.0);
  if (!(c.dt > 0.0)) throw ConfigError("time.dt must be positive");
  c.n_steps = r.integer("time.steps", 0);
  if (c.n_steps < 0) throw ConfigError("time.steps must be non-negative");

  c.adapt.tol_u = r.num("adapt.tol_u", c.adapt.tol_u);
  c.adapt.fact = r.num("adapt.fact", c.adapt.fact);
  c.adapt.n_keep = r.integer("adapt.n_keep", c.adapt.n_keep);
  c.start_full = r.flag("adapt.start_full", false);
  c.adapt.validate();

  const double default_length = c.problem == ProblemId::rutherford ? 1.0 : 10.0;
  c.oracle.length = r.num("problem.length", default_length);
  c.oracle.lambda = r.num("problem.lambda", c.oracle.lambda);
  c.oracle.cv = r.num("problem.cv", c.oracle.cv);
  c.oracle.sigma = r.num("problem.sigma", c.oracle.sigma);
  if (!(c.oracle.length > 0.0) || !(c.oracle.lambda > 0.0) || !(c.oracle.cv > 0.0) || !(c.oracle.sigma > 0.0))
    throw ConfigError("problem.length, lambda, cv and sigma must be positive");
  c.rutherford.length = c.oracle.length;
  c.rutherford.qmax = r.num("source.qmax", c.rutherford.qmax);
  c.rutherford.zq = r.num("source.zq", c.rutherford.zq);
  c.rutherford.sigma = r.num("source.sigma", c.rutherford.sigma);
  c.rutherford.theta0 = r.num("source.theta0", c.rutherford.theta0);
  c.rutherford.source_region = r.integer("source.region", c.rutherford.source_region);
  if (!(c.rutherford.sigma > 0.0)) throw ConfigError("source.sigma must be positive");

  c.lambda_z = separable_factor(entries, "lambda_z");
  c.cv_z = separable_factor(entries, "cv_z");
  if (!(c.lambda_z > 0.0) || !(c.cv_z > 0.0)) throw ConfigError("material.lambda_z and cv_z must be positive");

  if (c.is_3d()) {
    const auto* mesh = r.find("mesh.path");
    if (!mesh || mesh->empty()) throw ConfigError("missing mesh path for " + c.solver + " (set mesh.path)");
    c.mesh_path = fs::path(*mesh).is_absolute() ? fs::path(*mesh) : base_dir / *mesh;
  }

  for (auto it = entries.lower_bound("probes."); it != entries.end() && it->first.rfind("probes.", 0) == 0; ++it) {
    const auto xyz = split(it->second, ' ');
    if (xyz.size() != 3) throw ConfigError(it->first + ": expected 'x y z'");
    c.probes.push_back({it->first.substr(7), to_double(it->first, xyz[0]), to_double(it->first, xyz[1]),
                        to_double(it->first, xyz[2])});
  }
  if (!c.is_3d() && !c.probes.empty()) throw ConfigError("probes are only used by q3d and aq3d");

  c.grid_points = r.integer("output.grid_points", 1001);
  if (c.grid_points < 2) throw ConfigError("output.grid_points must be at least 2");
  c.quad_depth = r.integer("output.quad_depth", 12);
  if (c.quad_depth < 4 || c.quad_depth > 20) throw ConfigError("output.quad_depth must be in [4, 20]");
  c.write_samples = r.flag("output.samples", false);
  c.profile_points = r.integer("output.profile_points", 0);
  if (c.profile_points == 1 || c.profile_points < 0) throw ConfigError("output.profile_points must be 0 or >= 2");
  if (const auto* z = r.find("output.cross_section_z")) c.cross_section_z = to_double("output.cross_section_z", *z);

  if (const auto* key = r.find("sweep.key")) {
    SweepSpec s;
    s.key = *key;
    s.values = split(r.str("sweep.values", ""), ',');
    s.meshes = split(r.str("sweep.meshes", ""), ',');
    if (s.values.empty()) throw ConfigError("sweep.values is empty");
    if (!s.meshes.empty() && s.meshes.size() != s.values.size())
      throw ConfigError("sweep.meshes must have one entry per sweep value");
    if (s.key.rfind("sweep.", 0) == 0 || s.key == "run.output" || !known_keys.count(s.key))
      throw ConfigError("sweep.key: cannot sweep '" + s.key + "'");
    c.sweep = std::move(s);
  } else if (r.find("sweep.values") || r.find("sweep.meshes")) {
    throw ConfigError("sweep.values given without sweep.key");
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return make_config(parse_ini(text.str(), path.string()), path.parent_path(), path.stem().string());
}

RunConfig with_override(const RunConfig& config, const std::string& key, const std::string& value) {
  Entries e = config.entries;
  e[key] = value;
  return make_config(e, config.base_dir, config.name);
}

fs::path preset_path(const std::string& name) {
  const char* env = std::getenv("Q3DW_PRESETS");
  const fs::path dir = env && *env ? fs::path(env) : fs::path(Q3DW_PRESET_DIR);
  fs::path p = dir / (name + ".ini");
  if (!fs::exists(p)) throw ConfigError("unknown preset '" + name + "' (looked for " + p.string() + ")");
  return p;
}

}  // namespace q3dw::bench
