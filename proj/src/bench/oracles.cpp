#include "q3dw/bench.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace q3dw::bench {

namespace {
constexpr double pi = std::numbers::pi;
}

ProblemId parse_problem(const std::string& name) {
  if (name == "sin_decay_1d") return ProblemId::sin_decay_1d;
  if (name == "gauss_kernel_1d") return ProblemId::gauss_kernel_1d;
  if (name == "cos_sin_3d") return ProblemId::cos_sin_3d;
  if (name == "rutherford") return ProblemId::rutherford;
  throw ConfigError("unknown problem '" + name + "' (expected sin_decay_1d, gauss_kernel_1d, cos_sin_3d or rutherford)");
}

std::string to_string(ProblemId id) {
  switch (id) {
    case ProblemId::sin_decay_1d: return "sin_decay_1d";
    case ProblemId::gauss_kernel_1d: return "gauss_kernel_1d";
    case ProblemId::cos_sin_3d: return "cos_sin_3d";
    case ProblemId::rutherford: return "rutherford";
  }
  return "?";
}

bool has_oracle(ProblemId id) { return id != ProblemId::rutherford; }

double sin_decay_1d(const OracleParams& p, double x, double t) {
  const double k = pi / p.length;
  return std::sin(k * x) * std::exp(-(p.lambda / p.cv) * k * k * t);
}

double gauss_kernel_1d(const OracleParams& p, double x, double t) {
  const double s2 = p.sigma * p.sigma;
  const double spread = s2 + 2.0 * (p.lambda / p.cv) * t;
  const double d = x - 0.5 * p.length;
  return std::sqrt(s2 / spread) * std::exp(-d * d / (2.0 * spread));
}

double cos_sin_3d(const OracleParams& p, double x, double y, double z, double t) {
  const double rate = (p.lambda / p.cv) * pi * pi * (2.0 + 64.0 / (p.length * p.length));
  return std::cos(pi * x) * std::cos(pi * y) * std::sin(8.0 * pi * z / p.length) * std::exp(-rate * t);
}

double analytic_oracle(ProblemId id, const OracleParams& p, double x, double y, double z, double t) {
  switch (id) {
    case ProblemId::sin_decay_1d: return sin_decay_1d(p, x, t);
    case ProblemId::gauss_kernel_1d: return gauss_kernel_1d(p, x, t);
    case ProblemId::cos_sin_3d: return cos_sin_3d(p, x, y, z, t);
    case ProblemId::rutherford: break;
  }
  throw ConfigError("problem " + to_string(id) + " has no analytic solution");
}

HeatProblem1D make_problem_1d(ProblemId id, const OracleParams& p) {
  if (id != ProblemId::sin_decay_1d && id != ProblemId::gauss_kernel_1d)
    throw ConfigError("problem " + to_string(id) + " is not one-dimensional");
  HeatProblem1D h;
  h.length = p.length;
  h.lambda = p.lambda;
  h.cv = p.cv;
  auto f = [id, p](double x, double t) { return analytic_oracle(id, p, x, 0.0, 0.0, t); };
  h.left = EndCondition::dirichlet([f](double t) { return f(0.0, t); });
  h.right = EndCondition::dirichlet([f, l = p.length](double t) { return f(l, t); });
  h.initial = [f](double x) { return f(x, 0.0); };
  h.validate();
  return h;
}

HeatProblem3D make_cos_sin_problem(const OracleParams& p, Mesh2D mesh) {
  HeatProblem3D h;
  for (auto& [id, m] : mesh.materials) m = {p.lambda, p.cv};
  h.mesh = std::move(mesh);
  h.length = p.length;
  h.initial_xy = [](double x, double y) { return std::cos(pi * x) * std::cos(pi * y); };
  h.initial_z = [l = p.length](double z) { return std::sin(8.0 * pi * z / l); };
  return h;
}

HeatProblem3D make_rutherford_problem(const RutherfordParams& p, Mesh2D mesh) {
  if (!mesh.materials.count(p.source_region))
    throw ConfigError("source region " + std::to_string(p.source_region) + " is not in the mesh");
  HeatProblem3D h;
  h.mesh = std::move(mesh);
  h.length = p.length;
  h.source_regions = {{p.source_region, p.qmax}};
  h.source_z = [zq = p.zq, s2 = p.sigma * p.sigma](double z, double) { return std::exp(-(z - zq) * (z - zq) / s2); };
  h.front = FaceCondition::dirichlet([v = p.theta0](double, double, double) { return v; });
  h.back = h.front;
  h.initial_xy = [v = p.theta0](double, double) { return v; };
  h.initial_z = [](double) { return 1.0; };
  return h;
}

std::vector<double> uniform_grid(double a, double b, int points) {
  if (points < 2) throw ConfigError("an evaluation grid needs at least 2 points");
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) g[i] = a + (b - a) * i / (points - 1);
  g.back() = b;
  return g;
}

ErrorReport compute_error(const std::vector<double>& times, const std::vector<Vector>& coefficients,
                          const IntervalBasis& basis, const std::function<double(double, double)>& oracle,
                          std::span<const double> grid, int quad_depth) {
  if (times.size() != coefficients.size()) throw std::invalid_argument("one coefficient vector per time expected");
  ErrorReport r;
  const SparseMatrix e = basis.evaluation_matrix(grid);
  const SparseMatrix proj = basis.projection_matrix(quad_depth);
  const std::vector<double> qgrid = basis.quadrature_grid(quad_depth);
  Vector samples(static_cast<Eigen::Index>(qgrid.size()));
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    for (std::size_t g = 0; g < qgrid.size(); ++g) samples[g] = oracle(qgrid[g], t);
    r.norm_inf_coeff = std::max(r.norm_inf_coeff, (coefficients[i] - proj * samples).cwiseAbs().maxCoeff());
    const Vector theta = e * coefficients[i];
    for (std::size_t g = 0; g < grid.size(); ++g)
      r.norm_max_grid = std::max(r.norm_max_grid, std::abs(theta[g] - oracle(grid[g], t)));
  }
  return r;
}

ErrorReport compute_edge_error(const std::vector<double>& times, const std::vector<Matrix>& states,
                               const Mesh2D& mesh, const IntervalBasis& basis,
                               const std::function<double(double, double, double, double)>& oracle,
                               std::span<const double> zs, const std::function<Matrix(double)>& coeff_oracle) {
  if (times.size() != states.size()) throw std::invalid_argument("one state per time expected");
  ErrorReport r;
  r.edge_max.assign(mesh.node_count(), 0.0);
  const Matrix et = Matrix(basis.evaluation_matrix(zs)).transpose();
  r.norm_inf_coeff = coeff_oracle ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Matrix theta = states[i] * et;
    for (int n = 0; n < mesh.node_count(); ++n) {
      const Node& p = mesh.nodes[n];
      for (std::size_t k = 0; k < zs.size(); ++k)
        r.edge_max[n] = std::max(r.edge_max[n], std::abs(theta(n, k) - oracle(p.x, p.y, zs[k], times[i])));
    }
    if (coeff_oracle)
      r.norm_inf_coeff = std::max(r.norm_inf_coeff, (states[i] - coeff_oracle(times[i])).cwiseAbs().maxCoeff());
  }
  for (double e : r.edge_max) r.norm_max_grid = std::max(r.norm_max_grid, e);
  return r;
}

}  // namespace q3dw::bench
