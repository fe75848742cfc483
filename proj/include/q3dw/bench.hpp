#pragma once

#include "q3dw/adaptive_1d.hpp"
#include "q3dw/aq3d.hpp"
#include "q3dw/q3d.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace q3dw::bench {

enum class ProblemId { sin_decay_1d, gauss_kernel_1d, cos_sin_3d, rutherford };

ProblemId parse_problem(const std::string& name);
std::string to_string(ProblemId id);
bool has_oracle(ProblemId id);

struct OracleParams {
  double length = 10.0;
  double lambda = 10.0;
  double cv = 1.0;
  double sigma = 0.15;  // gauss_kernel_1d
};

// sin(pi x / L) exp(-(lambda/cv) (pi/L)^2 t)
double sin_decay_1d(const OracleParams& p, double x, double t);
// Heat-kernel evolution of exp(-(x - L/2)^2 / (2 sigma^2)) on the real line.
double gauss_kernel_1d(const OracleParams& p, double x, double t);
// cos(pi x) cos(pi y) sin(8 pi z / L) exp(-(lambda/cv) pi^2 (2 + 64/L^2) t)
double cos_sin_3d(const OracleParams& p, double x, double y, double z, double t);
// Dispatch; throws ConfigError for problems without a closed form.
double analytic_oracle(ProblemId id, const OracleParams& p, double x, double y, double z, double t);

// Dirichlet data from the oracle on both ends, theta0 = oracle at t = 0.
HeatProblem1D make_problem_1d(ProblemId id, const OracleParams& p);

// Every region gets (lambda, cv); homogeneous Dirichlet front/back, insulated hull.
HeatProblem3D make_cos_sin_problem(const OracleParams& p, Mesh2D mesh);

struct RutherfordParams {
  double length = 1.0;
  double qmax = 1e6;
  double zq = 0.33;
  double sigma = 0.05;
  double theta0 = 2.0;
  int source_region = 1;
};

// q = qmax exp(-(z - zq)^2 / sigma^2) on source_region, theta = theta0 on the
// front/back faces and initially, insulated hull.
HeatProblem3D make_rutherford_problem(const RutherfordParams& p, Mesh2D mesh);

struct ErrorReport {
  // max over steps of the largest coefficient deviation from the projected oracle
  double norm_inf_coeff = 0.0;
  // max over steps and grid points of |theta - oracle|
  double norm_max_grid = 0.0;
  // 3-D: the grid norm per longitudinal edge (FE node)
  std::vector<double> edge_max;
};

std::vector<double> uniform_grid(double a, double b, int points = 1001);

ErrorReport compute_error(const std::vector<double>& times, const std::vector<Vector>& coefficients,
                          const IntervalBasis& basis, const std::function<double(double, double)>& oracle,
                          std::span<const double> grid, int quad_depth = 12);

// Edge norms on every FE node; the coefficient norm uses coeff_oracle(t)
// (anzfe x anz) when given and is NaN otherwise.
ErrorReport compute_edge_error(const std::vector<double>& times, const std::vector<Matrix>& states,
                               const Mesh2D& mesh, const IntervalBasis& basis,
                               const std::function<double(double, double, double, double)>& oracle,
                               std::span<const double> zs,
                               const std::function<Matrix(double)>& coeff_oracle = {});

// Flat "section.key" -> value view of an INI file.
using Entries = std::map<std::string, std::string>;

Entries parse_ini(const std::string& text, const std::string& source = "<string>");

struct SweepSpec {
  std::string key;
  std::vector<std::string> values;
  std::vector<std::string> meshes;  // zipped with values when not empty
};

struct RunConfig {
  std::string name;
  std::string solver;  // ssm, arm, q3d, aq3d
  ProblemId problem = ProblemId::sin_decay_1d;
  int n = 6;
  std::optional<int> j, jmin, jmax;
  double dt = 0.0;
  int n_steps = 0;
  AdaptConfig adapt;
  bool start_full = false;
  OracleParams oracle;
  RutherfordParams rutherford;
  double lambda_z = 1.0, cv_z = 1.0;
  std::filesystem::path mesh_path;
  std::vector<Probe> probes;
  std::string output;
  int grid_points = 1001;
  int quad_depth = 12;
  bool write_samples = false;
  int profile_points = 0;
  std::optional<double> cross_section_z;
  std::optional<SweepSpec> sweep;

  Entries entries;               // everything read, for the manifest
  std::filesystem::path base_dir;  // relative paths resolve here

  bool is_3d() const { return solver == "q3d" || solver == "aq3d"; }
  bool is_adaptive() const { return solver == "arm" || solver == "aq3d"; }
};

// Throws ConfigError naming the offending key.
RunConfig make_config(const Entries& entries, const std::filesystem::path& base_dir, const std::string& name);
RunConfig load_config(const std::filesystem::path& path);
// Copy of the config with one entry replaced, re-validated.
RunConfig with_override(const RunConfig& config, const std::string& key, const std::string& value);

// --out wins; otherwise run.output, placed under $Q3DW_OUTPUT_ROOT when that is
// set and the configured path is relative.
std::filesystem::path resolve_output(const RunConfig& config, const std::optional<std::filesystem::path>& cli_out);

// presets/<name>.ini under $Q3DW_PRESETS or the installed preset directory.
std::filesystem::path preset_path(const std::string& name);

struct RunSummary {
  std::string label;
  long long dofs = 0;  // static DoF count at the finest resolution
  long long max_active_dofs = 0;
  std::optional<ErrorReport> errors;
  std::vector<std::filesystem::path> outputs;
};

// Solves, writes CSVs and manifest.json into out_dir.
RunSummary run(const RunConfig& config, const std::filesystem::path& out_dir);

// One run per sweep value in out_dir/<key>=<value>, plus sweep.csv.
std::vector<RunSummary> run_sweep(const RunConfig& config, const std::filesystem::path& out_dir);

std::string sha256_file(const std::filesystem::path& path);

// CLI exit codes: 1 config, 2 io, 3 numeric.
int exit_code_for(const std::exception& e);

}  // namespace q3dw::bench
