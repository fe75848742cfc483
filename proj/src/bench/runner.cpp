#include "q3dw/bench.hpp"

#include "../io_util.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>

#ifndef Q3DW_VERSION
#define Q3DW_VERSION "unknown"
#endif

namespace q3dw::bench {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string to_hex(const unsigned char* d, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < n; ++i) {
    out += digits[d[i] >> 4];
    out += digits[d[i] & 15];
  }
  return out;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
  std::string hex() {
    unsigned char d[EVP_MAX_MD_SIZE];
    unsigned n = 0;
    EVP_DigestFinal_ex(ctx_, d, &n);
    return to_hex(d, n);
  }

 private:
  EVP_MD_CTX* ctx_;
};

std::string sha256_text(const std::string& s) {
  Sha256 h;
  h.update(s.data(), s.size());
  return h.hex();
}

std::string canonical_entries(const Entries& e) {
  std::string out;
  for (const auto& [k, v] : e) out += k + "=" + v + "\n";
  return out;
}

void write_errors_csv(const fs::path& path, const ErrorReport& r) {
  auto out = detail::open_output(path);
  out << "norm_inf_coeff,norm_max_grid\n" << r.norm_inf_coeff << ',' << r.norm_max_grid << '\n';
  detail::check_written(out, path);
}

void write_edge_errors_csv(const fs::path& path, const Mesh2D& mesh, const ErrorReport& r) {
  auto out = detail::open_output(path);
  out << "node,x,y,max_error\n";
  for (int n = 0; n < mesh.node_count(); ++n)
    out << n << ',' << mesh.nodes[n].x << ',' << mesh.nodes[n].y << ',' << r.edge_max[n] << '\n';
  detail::check_written(out, path);
}

json resolved(const RunConfig& c) {
  json j;
  j["solver"] = c.solver;
  j["problem"] = to_string(c.problem);
  j["n"] = c.n;
  if (c.j) j["j"] = *c.j;
  if (c.jmin) j["jmin"] = *c.jmin;
  if (c.jmax) j["jmax"] = *c.jmax;
  j["dt"] = c.dt;
  j["n_steps"] = c.n_steps;
  if (c.is_adaptive()) {
    j["tol_u"] = c.adapt.tol_u;
    j["fact"] = c.adapt.fact;
    j["n_keep"] = c.adapt.n_keep;
    j["start_full"] = c.start_full;
  }
  j["length"] = c.oracle.length;
  if (c.problem == ProblemId::rutherford) {
    j["qmax"] = c.rutherford.qmax;
    j["zq"] = c.rutherford.zq;
    j["source_sigma"] = c.rutherford.sigma;
    j["theta0"] = c.rutherford.theta0;
    j["source_region"] = c.rutherford.source_region;
  } else {
    j["lambda"] = c.oracle.lambda;
    j["cv"] = c.oracle.cv;
    if (c.problem == ProblemId::gauss_kernel_1d) j["sigma"] = c.oracle.sigma;
  }
  if (c.is_3d()) {
    j["lambda_z"] = c.lambda_z;
    j["cv_z"] = c.cv_z;
    j["mesh"] = c.entries.at("mesh.path");
    json probes = json::array();
    for (const auto& p : c.probes) probes.push_back({{"name", p.name}, {"x", p.x}, {"y", p.y}, {"z", p.z}});
    j["probes"] = probes;
  }
  j["grid_points"] = c.grid_points;
  j["quad_depth"] = c.quad_depth;
  return j;
}

json versions() {
  return {{"q3dw", Q3DW_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"compiler", __VERSION__},
          {"cxx", static_cast<long>(__cplusplus)}};
}

json error_json(const std::optional<ErrorReport>& e) {
  if (!e) return nullptr;
  return {{"norm_inf_coeff", std::isnan(e->norm_inf_coeff) ? json(nullptr) : json(e->norm_inf_coeff)},
          {"norm_max_grid", e->norm_max_grid}};
}

void write_manifest(const fs::path& out_dir, const json& base, const std::vector<fs::path>& outputs) {
  json m = base;
  json files = json::object();
  for (const auto& p : outputs) files[fs::relative(p, out_dir).generic_string()] = sha256_file(p);
  m["outputs"] = files;
  const fs::path path = out_dir / "manifest.json";
  auto out = detail::open_output(path);
  out << m.dump(2) << '\n';
  detail::check_written(out, path);
}

RunSummary run_1d(const RunConfig& c, const fs::path& out_dir) {
  const HeatProblem1D problem = make_problem_1d(c.problem, c.oracle);
  const auto family = make_family(c.n);
  const auto grid = uniform_grid(0.0, c.oracle.length, c.grid_points);
  auto oracle = [&](double x, double t) { return analytic_oracle(c.problem, c.oracle, x, 0.0, 0.0, t); };
  RunSummary s;
  Trajectory traj;
  std::shared_ptr<const WaveletTransform> wt;
  std::unique_ptr<IntervalBasis> own;
  const IntervalBasis* basis = nullptr;
  if (c.solver == "ssm") {
    own = std::make_unique<IntervalBasis>(family, *c.j, 0.0, c.oracle.length);
    basis = own.get();
    traj = solve(problem, *basis, c.dt, c.n_steps, c.quad_depth);
    s.max_active_dofs = basis->size();
  } else {
    wt = std::make_shared<const WaveletTransform>(family, c.oracle.length, *c.jmin, *c.jmax);
    basis = &wt->finest();
    AdaptiveOptions o;
    o.quad_depth = c.quad_depth;
    o.start_full = c.start_full;
    AdaptiveTrajectory a = solve_adaptive(problem, c.adapt, wt, c.dt, c.n_steps, o);
    for (const auto& r : a.log) s.max_active_dofs = std::max<long long>(s.max_active_dofs, r.eta);
    s.outputs.push_back(out_dir / "step_log.csv");
    write_step_log_csv(s.outputs.back(), a.log);
    traj = {std::move(a.times), std::move(a.coefficients)};
  }
  for (const auto& u : traj.coefficients)
    if (!u.allFinite()) throw NumericError("non-finite coefficients in the trajectory");
  s.dofs = basis->size();
  s.errors = compute_error(traj.times, traj.coefficients, *basis, oracle, grid, c.quad_depth);
  s.outputs.push_back(out_dir / "trajectory.csv");
  write_trajectory_csv(s.outputs.back(), traj);
  s.outputs.push_back(out_dir / "errors.csv");
  write_errors_csv(s.outputs.back(), *s.errors);
  if (c.write_samples) {
    s.outputs.push_back(out_dir / "samples.csv");
    write_samples_csv(s.outputs.back(), traj, *basis, grid);
  }
  return s;
}

RunSummary run_3d(const RunConfig& c, const fs::path& out_dir) {
  Mesh2D mesh = load_mesh(c.mesh_path);
  HeatProblem3D problem;
  if (c.problem == ProblemId::cos_sin_3d) {
    if (c.lambda_z != 1.0 || c.cv_z != 1.0)
      throw ConfigError("cos_sin_3d has a closed form only for material.lambda_z = material.cv_z = 1");
    problem = make_cos_sin_problem(c.oracle, std::move(mesh));
  } else {
    problem = make_rutherford_problem(c.rutherford, std::move(mesh));
    problem.lambda_z = c.lambda_z;
    problem.cv_z = c.cv_z;
  }
  for (const auto& p : c.probes)
    if (p.z < 0.0 || p.z > problem.length || problem.mesh.locate(p.x, p.y) < 0)
      throw ConfigError("probe " + p.name + " lies outside the domain");
  const bool with_oracle = has_oracle(c.problem);
  const auto family = make_family(c.n);

  RunSummary s;
  std::unique_ptr<IntervalBasis> own;
  std::shared_ptr<const WaveletTransform> wt;
  const IntervalBasis* basis = nullptr;
  std::vector<double> times;
  std::vector<std::vector<double>> probe_values;
  std::vector<Matrix> states;
  if (c.solver == "q3d") {
    own = std::make_unique<IntervalBasis>(family, *c.j, 0.0, problem.length);
    basis = own.get();
    Q3DOptions o;
    o.quad_depth = c.quad_depth;
    o.probes = c.probes;
    o.keep_states = with_oracle;
    Q3DResult r = solve_q3d(problem, *basis, c.dt, c.n_steps, o);
    s.max_active_dofs = static_cast<long long>(problem.mesh.node_count()) * basis->size();
    times = std::move(r.times);
    probe_values = std::move(r.probe_values);
    states = std::move(r.states);
  } else {
    wt = std::make_shared<const WaveletTransform>(family, problem.length, *c.jmin, *c.jmax);
    basis = &wt->finest();
    AQ3DOptions o;
    o.quad_depth = c.quad_depth;
    o.probes = c.probes;
    o.keep_states = with_oracle;
    o.start_full = c.start_full;
    AQ3DResult r = solve_aq3d(problem, c.adapt, wt, c.dt, c.n_steps, o);
    if (r.checksum_start != r.checksum_end) throw NumericError("static system changed during the run");
    for (const auto& d : r.log) s.max_active_dofs = std::max(s.max_active_dofs, d.active_dofs);
    s.outputs.push_back(out_dir / "dofs.csv");
    write_dof_log_csv(s.outputs.back(), r.log);
    times = std::move(r.times);
    probe_values = std::move(r.probe_values);
    states = std::move(r.states);
  }
  const Mesh2D& m = problem.mesh;
  s.dofs = static_cast<long long>(m.node_count()) * basis->size();

  s.outputs.push_back(out_dir / "probes.csv");
  write_probe_csv(s.outputs.back(), times, c.probes, probe_values);
  const Sampler sampler(m, *basis);
  if (c.profile_points > 0) {
    const auto zs = uniform_grid(0.0, problem.length, c.profile_points);
    for (const auto& p : c.probes) {
      s.outputs.push_back(out_dir / ("profile_" + p.name + ".csv"));
      write_profile_csv(s.outputs.back(), zs, sampler.z_profile(states.back(), p.x, p.y, zs));
    }
  }
  if (c.cross_section_z) {
    s.outputs.push_back(out_dir / "cross_section.csv");
    write_cross_section_csv(s.outputs.back(), m, sampler.cross_section(states.back(), *c.cross_section_z));
  }
  if (with_oracle) {
    const auto zs = uniform_grid(0.0, problem.length, c.grid_points);
    const OracleParams p = c.oracle;
    const double pi = std::numbers::pi;
    const Vector xy = interpolate(m, [pi](double x, double y) { return std::cos(pi * x) * std::cos(pi * y); });
    const Vector z = basis->project([&](double zz) { return std::sin(8.0 * pi * zz / p.length); }, c.quad_depth);
    const Matrix separable = xy * z.transpose();
    const double rate = (p.lambda / p.cv) * pi * pi * (2.0 + 64.0 / (p.length * p.length));
    auto coeff = [&](double t) { return Matrix(separable * std::exp(-rate * t)); };
    auto oracle = [&](double x, double y, double zz, double t) { return cos_sin_3d(p, x, y, zz, t); };
    s.errors = compute_edge_error(times, states, m, *basis, oracle, zs, coeff);
    s.outputs.push_back(out_dir / "errors.csv");
    write_errors_csv(s.outputs.back(), *s.errors);
    s.outputs.push_back(out_dir / "edge_errors.csv");
    write_edge_errors_csv(s.outputs.back(), m, *s.errors);
  }
  return s;
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Sha256 h;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) h.update(buf, static_cast<std::size_t>(in.gcount()));
  return h.hex();
}

RunSummary run(const RunConfig& config, const fs::path& out_dir) {
  RunSummary s = config.is_3d() ? run_3d(config, out_dir) : run_1d(config, out_dir);
  s.label = config.name;
  json m;
  m["name"] = config.name;
  m["config"] = config.entries;
  m["config_sha256"] = sha256_text(canonical_entries(config.entries));
  m["resolved"] = resolved(config);
  m["versions"] = versions();
  if (config.is_3d()) m["mesh_sha256"] = sha256_file(config.mesh_path);
  m["summary"] = {{"dofs", s.dofs}, {"max_active_dofs", s.max_active_dofs}, {"errors", error_json(s.errors)}};
  write_manifest(out_dir, m, s.outputs);
  s.outputs.push_back(out_dir / "manifest.json");
  return s;
}

std::vector<RunSummary> run_sweep(const RunConfig& config, const fs::path& out_dir) {
  if (!config.sweep) throw ConfigError("config " + config.name + " has no [sweep] section");
  const SweepSpec& sw = *config.sweep;
  std::vector<RunSummary> out;
  std::vector<fs::path> files;
  const fs::path table = out_dir / "sweep.csv";
  auto csv = detail::open_output(table);
  csv << "label,key,value,mesh,dofs,max_active_dofs,norm_inf_coeff,norm_max_grid\n";
  for (std::size_t i = 0; i < sw.values.size(); ++i) {
    RunConfig c = with_override(config, sw.key, sw.values[i]);
    std::string label = sw.key + "=" + sw.values[i];
    if (!sw.meshes.empty()) {
      c = with_override(c, "mesh.path", sw.meshes[i]);
      label += "_" + fs::path(sw.meshes[i]).stem().string();
    }
    c.sweep.reset();
    RunSummary s = run(c, out_dir / label);
    s.label = label;
    csv << label << ',' << sw.key << ',' << sw.values[i] << ',' << (sw.meshes.empty() ? "" : sw.meshes[i]) << ','
        << s.dofs << ',' << s.max_active_dofs << ',';
    if (s.errors)
      csv << s.errors->norm_inf_coeff << ',' << s.errors->norm_max_grid;
    else
      csv << ',';
    csv << '\n';
    files.push_back(out_dir / label / "manifest.json");
    out.push_back(std::move(s));
  }
  detail::check_written(csv, table);
  csv.close();
  files.insert(files.begin(), table);
  json m;
  m["name"] = config.name;
  m["config"] = config.entries;
  m["config_sha256"] = sha256_text(canonical_entries(config.entries));
  m["versions"] = versions();
  write_manifest(out_dir, m, files);
  return out;
}

fs::path resolve_output(const RunConfig& config, const std::optional<fs::path>& cli_out) {
  if (cli_out) return *cli_out;
  const fs::path configured(config.output);
  const char* root = std::getenv("Q3DW_OUTPUT_ROOT");
  if (root && *root && configured.is_relative()) return fs::path(root) / configured;
  return configured;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const std::invalid_argument*>(&e)) return 1;
  if (dynamic_cast<const IoError*>(&e)) return 2;
  return 3;
}

}  // namespace q3dw::bench
