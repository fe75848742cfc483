// Acceptance checks 1-8. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Arguments select a subset, e.g. "2 5".
#include "oracles.hpp"
#include "q3dw/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace q3dw;

namespace {

const double pi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.3e", x);
  return s;
}

// 1. Gram, vanishing moments (boundary wavelets included), FWT round trip.
Outcome wavelet_validity() {
  double gram = 0.0, moments = 0.0, round_trip = 0.0;
  std::mt19937 gen(1);
  std::normal_distribution<double> nd;
  for (int n : {2, 3, 6}) {
    const auto family = make_family(n);
    for (int j : {0, -1, -2}) {
      auto coarse = std::make_shared<const IntervalBasis>(family, j, 0.0, 10.0);
      auto fine = std::make_shared<const IntervalBasis>(family, j - 1, 0.0, 10.0);
      const Matrix g = oracle::quadrature_gram(*coarse);
      gram = std::max(gram, (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
      const WaveletStep step(coarse, fine);
      for (int k = 0; k < n; ++k) {
        const Vector m = oracle::quadrature_moments(*fine, [k](double x) { return std::pow(x / 10.0, k); });
        moments = std::max(moments, Vector(step.highpass() * m).cwiseAbs().maxCoeff());
      }
    }
    const WaveletTransform wt(family, 10.0, -3, 0);
    for (int trial = 0; trial < 5; ++trial) {
      Vector v(wt.size());
      for (auto& x : v) x = nd(gen);
      round_trip = std::max(round_trip, (wt.inverse(wt.forward(v)) - v).cwiseAbs().maxCoeff());
    }
  }
  return {gram < 1e-7 && moments < 1e-6 && round_trip < 1e-12,
          "gram dev " + fmt("%.2e", gram) + " (< 1e-7), moments " + fmt("%.2e", moments) + " (< 1e-6), round trip " +
              fmt("%.2e", round_trip) + " (< 1e-12)"};
}

bench::ErrorReport one_d_errors(bench::ProblemId id, const bench::OracleParams& p, const IntervalBasis& basis,
                                const std::vector<double>& times, const std::vector<Vector>& coeffs) {
  const auto grid = bench::uniform_grid(0.0, p.length);
  return bench::compute_error(
      times, coeffs, basis, [&](double x, double t) { return bench::analytic_oracle(id, p, x, 0, 0, t); }, grid);
}

// 2. SSM convergence on the decaying sine, scales 0 .. -5.
Outcome ssm_convergence() {
  const bench::OracleParams p{10.0, 10.0, 1.0, 0.15};
  const auto problem = bench::make_problem_1d(bench::ProblemId::sin_decay_1d, p);
  const auto family = make_family(6);
  std::vector<double> coeff, grid;
  for (int j = 0; j >= -5; --j) {
    IntervalBasis basis(family, j, 0.0, p.length);
    const Trajectory t = solve(problem, basis, 1e-3, 100);
    const auto e = one_d_errors(bench::ProblemId::sin_decay_1d, p, basis, t.times, t.coefficients);
    coeff.push_back(e.norm_inf_coeff);
    grid.push_back(e.norm_max_grid);
  }
  const double ratio = grid.front() / grid.back();
  const bool mono = strictly_decreasing(coeff) && strictly_decreasing(grid);
  return {mono && ratio >= 100.0, "coeff [" + join(coeff) + "], grid [" + join(grid) + "], monotone " +
                                      (mono ? "yes" : "no") + ", coarsest/finest " + fmt("%.1f", ratio) +
                                      " (>= 100)"};
}

// 3. ARM vs SSM on the spreading Gaussian.
Outcome arm_matches_ssm() {
  const bench::OracleParams p{10.0, 10.0, 1.0, 0.15};
  const auto id = bench::ProblemId::gauss_kernel_1d;
  const auto problem = bench::make_problem_1d(id, p);
  const auto family = make_family(3);
  const double dt = 5e-6;
  const int steps = 100;
  bool pass = true;
  double worst = 0.0;
  std::string eta;
  for (int jmin = 0; jmin >= -4; --jmin) {
    auto wt = std::make_shared<const WaveletTransform>(family, p.length, jmin, 0);
    AdaptConfig cfg;
    cfg.tol_u = 1e-8;
    const AdaptiveTrajectory a = solve_adaptive(problem, cfg, wt, dt, steps);
    const Trajectory s = solve(problem, wt->finest(), dt, steps);
    const auto ea = one_d_errors(id, p, wt->finest(), a.times, a.coefficients);
    const auto es = one_d_errors(id, p, wt->finest(), s.times, s.coefficients);
    const double rc = std::abs(ea.norm_inf_coeff / es.norm_inf_coeff - 1.0);
    const double rg = std::abs(ea.norm_max_grid / es.norm_max_grid - 1.0);
    worst = std::max({worst, rc, rg});
    int max_eta = 0;
    for (const auto& r : a.log) max_eta = std::max(max_eta, r.eta);
    const double bound = p.length * std::ldexp(1.0, -jmin + 1);
    eta += (eta.empty() ? "" : " ") + std::to_string(max_eta) + "/" + fmt("%.0f", bound);
    pass = pass && rc <= 0.05 && rg <= 0.05 && max_eta < bound;
  }
  return {pass, "max relative error difference " + fmt("%.2e", worst) + " (<= 5%), max active/bound [" + eta + "]"};
}

HeatProblem3D verification_problem(int cells, const bench::OracleParams& p) {
  return bench::make_cos_sin_problem(p, rectangle_mesh(0.0, 1.0, 0.0, 1.0, cells, cells, {p.lambda, p.cv}));
}

// 4. Q3D against the separable analytic solution, three refinements.
Outcome q3d_verification() {
  const bench::OracleParams p{10.0, 10.0, 5.0, 0.15};
  const auto family = make_family(6);
  std::vector<double> err;
  std::string nodes;
  for (auto [cells, j] : {std::pair{12, -1}, std::pair{24, -2}, std::pair{48, -3}}) {
    const HeatProblem3D problem = verification_problem(cells, p);
    IntervalBasis basis(family, j, 0.0, p.length);
    Q3DOptions o;
    o.keep_states = true;
    const Q3DResult r = solve_q3d(problem, basis, 1e-4, 10, o);
    const auto zs = bench::uniform_grid(0.0, p.length);
    const auto e = bench::compute_edge_error(
        r.times, r.states, problem.mesh, basis,
        [&](double x, double y, double z, double t) { return bench::cos_sin_3d(p, x, y, z, t); }, zs);
    err.push_back(e.norm_max_grid);
    nodes += (nodes.empty() ? "" : "/") + std::to_string(problem.mesh.node_count());
  }
  const double ratio = err.front() / err.back();
  return {strictly_decreasing(err) && ratio >= 10.0,
          "max edge error [" + join(err) + "], nodes " + nodes + ", reduction " + fmt("%.1f", ratio) + " (>= 10)"};
}

struct Rutherford {
  RutherfordGeometry geometry;
  HeatProblem3D problem;
  std::vector<Probe> probes;
};

Rutherford rutherford(double length) {
  Rutherford r;
  bench::RutherfordParams p;
  p.length = length;
  r.problem = bench::make_rutherford_problem(p, rutherford_mesh(r.geometry));
  const char* names[] = {"left", "middle", "right"};
  for (int c = 0; c < 3; ++c) {
    const Node n = cable_center(r.geometry, c);
    r.probes.push_back({names[c], n.x, n.y, p.zq});
  }
  return r;
}

// Keeps only the final state.
Q3DResult rutherford_q3d(const Rutherford& r) {
  IntervalBasis basis(make_family(6), -5, 0.0, r.problem.length);
  Q3DOptions o;
  o.probes = r.probes;
  return solve_q3d(r.problem, basis, 5e-5, 200, o);
}

// 5. Qualitative Rutherford properties.
Outcome rutherford_properties() {
  const Rutherford r = rutherford(1.0);
  const Q3DResult q = rutherford_q3d(r);
  const double left = q.probe_values[0].back(), middle = q.probe_values[1].back(), right = q.probe_values[2].back();
  bool monotone = true;
  for (std::size_t s = 1; s < q.times.size(); ++s) monotone = monotone && q.probe_values[0][s] > q.probe_values[0][s - 1];
  IntervalBasis basis(make_family(6), -5, 0.0, 1.0);
  const Sampler sampler(r.problem.mesh, basis);
  const Vector grad = gradient_magnitudes(r.problem.mesh, sampler.cross_section(q.states.back(), 0.33));
  const int ins = insulation_region(r.geometry);
  double g_ins = 0.0, g_cable = 0.0;
  for (int e = 0; e < r.problem.mesh.element_count(); ++e)
    (r.problem.mesh.regions[e] == ins ? g_ins : g_cable) =
        std::max(r.problem.mesh.regions[e] == ins ? g_ins : g_cable, grad[e]);
  const double ratio = g_ins / g_cable;
  const bool order = left > middle && middle > right;
  return {order && monotone && ratio > 10.0 && std::abs(q.times.back() - 0.01) < 1e-12,
          "t=" + fmt("%.4g", q.times.back()) + " s: left " + fmt("%.4f", left) + " > middle " +
              fmt("%.4f", middle) + " > right " + fmt("%.4f", right) + " K (" + (order ? "yes" : "no") +
              "), left trace increasing " + (monotone ? "yes" : "no") + ", gradient ratio " + fmt("%.1f", ratio) +
              " (> 10)"};
}

AQ3DResult rutherford_aq3d(const Rutherford& r) {
  auto wt = std::make_shared<const WaveletTransform>(make_family(6), r.problem.length, -4, -3);
  AdaptConfig cfg;
  cfg.tol_u = 1e-4;
  AQ3DOptions o;
  o.probes = r.probes;
  return solve_aq3d(r.problem, cfg, wt, 5e-5, 200, o);
}

// 6. AQ3D follows Q3D on 1 m and stays below the DoF ceiling on 10 m.
Outcome aq3d_equivalence_and_reduction() {
  const Rutherford r1 = rutherford(1.0);
  const Q3DResult q = rutherford_q3d(r1);
  const AQ3DResult a = rutherford_aq3d(r1);
  double rel = 0.0;
  for (int c = 0; c < 3; ++c)
    for (std::size_t s = 0; s < q.times.size(); ++s)
      rel = std::max(rel, std::abs(a.probe_values[c][s] - q.probe_values[c][s]) / std::abs(q.probe_values[c][s]));

  const Rutherford r10 = rutherford(10.0);
  const AQ3DResult b = rutherford_aq3d(r10);
  bool below = true;
  long long peak = 0;
  for (const auto& d : b.log) {
    below = below && d.active_dofs < d.max_dofs;
    peak = std::max(peak, d.active_dofs);
  }
  const bool intact = a.checksum_start == a.checksum_end && b.checksum_start == b.checksum_end;
  return {rel <= 0.01 && below && intact && b.log.size() == 201,
          "(a) max relative trace difference " + fmt("%.2e", rel) + " (<= 1%); (b) 10 m peak active " +
              std::to_string(peak) + " of " + std::to_string(b.log.front().max_dofs) + " (strictly below: " +
              (below ? "yes" : "no") + "), static system unchanged " + (intact ? "yes" : "no")};
}

// Random smooth function on [0, l].
ScalarFunction random_profile(std::mt19937& gen, double l) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a = u(gen), b = u(gen), c = 1.0 + u(gen), k = pi * (1.5 + u(gen)) / l, z0 = l * (0.5 + 0.3 * u(gen));
  return [=](double z) { return a + b * std::sin(k * z) + c * std::exp(-(z - z0) * (z - z0)); };
}

// 7. Full-tuple ARM == SSM and AQ3D == Q3D on random small problems.
Outcome oracle_equivalence() {
  std::mt19937 gen(20260);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto pick = [&](const std::vector<int>& v) { return v[static_cast<std::size_t>(u(gen) * v.size()) % v.size()]; };
  AdaptConfig full;
  full.tol_u = 0.0;
  full.fact = std::numeric_limits<double>::infinity();
  double dev1 = 0.0, dev3 = 0.0;
  int max_anz = 0, max_anzfe = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    // Longitudinal setup shared by both checks: anz = L 2^-(jmin-1) <= 40.
    const int n = pick({3, 4, 6});
    const int jmax = pick({0, -1});
    const int levels = pick({1, 2});
    const int jmin = jmax - levels + 1;
    int l = 0;
    do {
      l = pick({4, 5, 6, 8, 10, 12});
    } while (l * std::ldexp(1.0, -jmax) < n || l * std::ldexp(1.0, -(jmin - 1)) > 40);
    auto wt = std::make_shared<const WaveletTransform>(make_family(n), double(l), jmin, jmax);
    const IntervalBasis& basis = wt->finest();
    max_anz = std::max(max_anz, basis.size());
    const double dt = 1e-3 + 9e-3 * u(gen);
    const int steps = 5 + static_cast<int>(10 * u(gen));
    std::vector<double> zs;
    for (int g = 0; g <= 100; ++g) zs.push_back(l * g / 100.0);

    HeatProblem1D p1;
    p1.length = l;
    p1.lambda = 0.5 + 4.5 * u(gen);
    p1.cv = 0.5 + 4.5 * u(gen);
    const double lv = u(gen), rv = u(gen), rate = u(gen);
    p1.left = u(gen) < 0.5 ? EndCondition::dirichlet([=](double t) { return lv + rate * t; })
                           : EndCondition::neumann([=](double) { return lv - 0.5; });
    p1.right = u(gen) < 0.5 ? EndCondition::dirichlet([=](double) { return rv; })
                            : EndCondition::neumann([=](double t) { return rv * t; });
    p1.initial = random_profile(gen, l);
    const AdaptiveTrajectory a = solve_adaptive(p1, full, wt, dt, steps, {12, true});
    const Trajectory s = solve(p1, basis, dt, steps);
    for (std::size_t i = 0; i < s.coefficients.size(); ++i)
      dev1 = std::max(dev1, (basis.evaluate(a.coefficients[i], zs) - basis.evaluate(s.coefficients[i], zs))
                                .cwiseAbs()
                                .maxCoeff());

    HeatProblem3D p3;
    const auto [nx, ny] = std::vector<std::pair<int, int>>{{1, 1}, {2, 1}, {2, 2}, {3, 2}, {1, 4}, {1, 5}}.at(
        static_cast<std::size_t>(u(gen) * 6) % 6);
    p3.mesh = rectangle_mesh(0.0, 1.0, 0.0, 0.5 + u(gen), nx, ny, {0.5 + 2 * u(gen), 0.5 + 2 * u(gen)});
    if (p3.mesh.element_count() > 1) {
      p3.mesh.materials[9] = {0.5 + 2 * u(gen), 0.5 + 2 * u(gen)};
      p3.mesh.regions[0] = 9;
    }
    max_anzfe = std::max(max_anzfe, p3.mesh.node_count());
    p3.length = l;
    const double rho = 0.5 + u(gen);
    p3.lambda_z = rho;
    p3.cv_z = u(gen) < 0.5 ? Coefficient(1.0) : Coefficient([](double z) { return 1.0 + 0.01 * z; });
    const double fv = u(gen);
    p3.front = FaceCondition::dirichlet([=](double x, double y, double t) { return fv + x * y + t; });
    p3.back = u(gen) < 0.5 ? FaceCondition::neumann([=](double x, double, double) { return 0.1 * x; })
                           : FaceCondition::dirichlet([=](double, double y, double) { return fv - y; });
    if (u(gen) < 0.5) {
      p3.source_xy = [](double x, double y, double) { return 1.0 + x - y; };
      const double zq = l * u(gen);
      p3.source_z = [=](double z, double) { return std::exp(-(z - zq) * (z - zq)); };
    }
    const ScalarFunction f = random_profile(gen, l);
    p3.initial = [f](double x, double y, double z) { return f(z) * (1.0 + 0.3 * x * y); };
    AQ3DOptions ao;
    ao.start_full = true;
    ao.keep_states = true;
    const AQ3DResult q = solve_aq3d(p3, full, wt, dt, steps, ao);
    Q3DOptions qo;
    qo.keep_states = true;
    const Q3DResult r = solve_q3d(p3, basis, dt, steps, qo);
    const Matrix e = Matrix(basis.evaluation_matrix(zs)).transpose();
    for (std::size_t i = 0; i < r.states.size(); ++i)
      dev3 = std::max(dev3, ((q.states[i] - r.states[i]) * e).cwiseAbs().maxCoeff());
  }
  return {dev1 < 1e-10 && dev3 < 1e-10 && max_anz <= 40 && max_anzfe <= 12,
          std::to_string(trials) + " trials (anz <= " + std::to_string(max_anz) + ", anzfe <= " +
              std::to_string(max_anzfe) + "): ARM vs SSM " + fmt("%.2e", dev1) + ", AQ3D vs Q3D " +
              fmt("%.2e", dev3) + " (< 1e-10)"};
}

// Row-major dense Kronecker product by definition.
Matrix dense_kron(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index n = 0; n < a.rows(); ++n)
    for (Eigen::Index m = 0; m < b.rows(); ++m)
      for (Eigen::Index n2 = 0; n2 < a.cols(); ++n2)
        for (Eigen::Index m2 = 0; m2 < b.cols(); ++m2)
          k(n * b.rows() + m, n2 * b.cols() + m2) = a(n, n2) * b(m, m2);
  return k;
}

// 8. Kronecker assembly vs dense brute force.
Outcome kronecker_correctness() {
  std::mt19937 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double dev = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    HeatProblem3D p;
    p.mesh = rectangle_mesh(0.0, 1.0, 0.0, 0.5, 1 + trial % 3, 1 + trial / 3, {0.5 + u(gen), 0.5 + u(gen)});
    p.mesh.materials[7] = {0.5 + u(gen), 0.5 + u(gen)};
    p.mesh.regions[0] = 7;
    p.length = 8.0;
    const double a = 0.1 * u(gen);
    p.lambda_z = Coefficient([a](double z) { return 1.0 + a * z; });
    p.cv_z = 0.5 + u(gen);
    p.back = FaceCondition::neumann([](double, double, double) { return 0.0; });
    IntervalBasis basis(make_family(3 + trial % 2), trial % 2 ? 0 : -1, 0.0, 8.0);
    const Q3DSystem s = assemble_q3d(p, basis);
    const auto fe = assemble_fem(p.mesh);
    const Matrix za(stiffness_matrix(basis, p.lambda_z)), zl(mass_matrix(basis, p.lambda_z)),
        zc(mass_matrix(basis, p.cv_z));
    const Matrix a_ref = dense_kron(Matrix(fe.A), zl) + dense_kron(Matrix(fe.M_lambda), za);
    const Matrix m_ref = dense_kron(Matrix(fe.M_cv), zc);
    dev = std::max({dev, (Matrix(s.A()) - a_ref).cwiseAbs().maxCoeff(), (Matrix(s.M()) - m_ref).cwiseAbs().maxCoeff()});
  }
  return {dev < 1e-12, "max entry deviation " + fmt("%.2e", dev) + " (< 1e-12) over 6 instances"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "wavelet validity", 30, wavelet_validity},
      {2, "SSM convergence", 120, ssm_convergence},
      {3, "ARM matches SSM", 120, arm_matches_ssm},
      {4, "Q3D verification", 300, q3d_verification},
      {5, "Rutherford Q3D properties", 0, rutherford_properties},
      {6, "AQ3D equivalence and reduction", 900, aq3d_equivalence_and_reduction},
      {7, "oracle equivalence", 0, oracle_equivalence},
      {8, "Kronecker correctness", 0, kronecker_correctness},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s == 0 || sec < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    const std::string limit = c.budget_s > 0 ? " (< " + fmt("%.0f", c.budget_s) + " s)" : "";
    std::printf("Criterion %d %s: %s | %s | %.1f s%s\n", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), sec,
                limit.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
