#include "q3dw/aq3d.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace q3dw;

namespace {

const double pi = std::numbers::pi;

HeatProblem3D small_problem() {
  HeatProblem3D p;
  p.mesh = rectangle_mesh(0.0, 1.0, 0.0, 1.0, 2, 2, {2.0, 1.0});
  for (std::size_t e = 0; e < p.mesh.boundary_edges.size(); ++e) {
    const auto& be = p.mesh.boundary_edges[e];
    p.mesh.boundary_markers[e] = p.mesh.nodes[be[0]].y == 0.0 && p.mesh.nodes[be[1]].y == 0.0 ? 3 : 0;
  }
  p.length = 8.0;
  p.front = FaceCondition::dirichlet([](double x, double, double) { return 1.0 + x; });
  p.back = FaceCondition::neumann([](double, double, double) { return 0.0; });
  p.hull.push_back({3, [](double x, double, double, double) { return 1.0 + x; }});
  p.source_xy = [](double x, double y, double) { return 1.0 + x * y; };
  p.source_z = [](double z, double) { return 5.0 * std::exp(-(z - 3.0) * (z - 3.0)); };
  p.initial = [](double x, double, double z) { return 1.0 + x + 0.2 * std::exp(-(z - 4.0) * (z - 4.0)); };
  return p;
}

std::shared_ptr<const WaveletTransform> transform(int n, double length, int jmin, int jmax) {
  return std::make_shared<const WaveletTransform>(make_family(n), length, jmin, jmax);
}

}  // namespace

TEST(AQ3DStatic, FactorsAreConjugatedByTheTransform) {
  auto p = small_problem();
  auto wt = transform(3, 8.0, -1, 0);
  auto mid = build_aq3d_static(p, wt);
  auto scale = assemble_q3d(p, wt->finest());
  const Matrix w(wt->matrix());
  EXPECT_LT((Matrix(mid.system.z_A) - w * Matrix(scale.z_A) * w.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((Matrix(mid.system.z_B) - Matrix(scale.z_B) * w.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((mid.system.rhs(0.0) - scale.rhs(0.0) * w.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(mid.checksum(), build_aq3d_static(p, wt).checksum());
  auto other = p;
  other.cv_z = 1.5;
  EXPECT_NE(mid.checksum(), build_aq3d_static(other, wt).checksum());
}

TEST(AQ3DSystem, QRowsAreOrthonormal) {
  auto wt = transform(3, 8.0, -2, 0);
  auto state = ResolutionState::empty(*wt);
  state.insert(-2, 3);
  state.insert(-2, 7);
  state.insert(0, 1);
  auto ts = build_transform(state);
  SparseMatrix q = q_matrix(5, ts);
  EXPECT_EQ(q.rows(), 5 * state.size());
  EXPECT_EQ(q.cols(), 5 * wt->size());
  Matrix qq = q * SparseMatrix(q.transpose());
  EXPECT_LT((qq - Matrix::Identity(qq.rows(), qq.cols())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AQ3DSystem, MatchesProjectionOfFlattenedStaticSystem) {
  auto p = small_problem();
  auto wt = transform(3, 8.0, -1, 0);
  auto mid = build_aq3d_static(p, wt);
  auto state = ResolutionState::empty(*wt);
  state.insert(-1, 2);
  state.insert(0, 0);
  auto ts = build_transform(state);
  auto dyn = assemble_aq3d(mid, ts);
  SparseMatrix q = q_matrix(mid.system.anzfe, ts), qt = q.transpose();
  EXPECT_LT((Matrix(dyn.A()) - Matrix(q * mid.system.A() * qt)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((Matrix(dyn.M()) - Matrix(q * mid.system.M() * qt)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((dyn.load(0.0) - q * mid.system.load(0.0)).cwiseAbs().maxCoeff(), 1e-12);

  auto wrong = transform(3, 8.0, -2, 0);
  EXPECT_THROW(assemble_aq3d(mid, build_transform(ResolutionState::full(*wrong))), std::invalid_argument);
}

TEST(AQ3DSystem, EmptyTuplesKeepOnlyCoarseScaling) {
  auto p = small_problem();
  auto wt = transform(6, 8.0, -2, -1);
  auto mid = build_aq3d_static(p, wt);
  auto dyn = assemble_aq3d(mid, build_transform(ResolutionState::empty(*wt)));
  EXPECT_EQ(dyn.dof_count(), mid.system.anzfe * wt->scaling_count());
}

TEST(AdaptAQ3D, StaticEdgesLeaveTheStateUnchanged) {
  auto wt = transform(3, 8.0, -2, 0);
  auto state = ResolutionState::empty(*wt);
  state.insert(-1, 4);
  state.insert(-2, 9);
  Matrix u = Matrix::Constant(6, state.size(), 1.0);
  AdaptConfig cfg;
  auto r = adapt_aq3d(state, 3, u, u, Matrix(), 1, cfg);
  EXPECT_TRUE(r.state.same_functions(state));
  EXPECT_EQ(r.added, 0);
  EXPECT_EQ(r.removed, 0);
  EXPECT_EQ(r.u, u);
}

TEST(AdaptAQ3D, OneEdgeRefinesEveryEdge) {
  auto wt = transform(3, 8.0, -2, 0);
  auto state = ResolutionState::empty(*wt);
  state.insert(-1, 4);
  Matrix prev = Matrix::Constant(5, state.size(), 1.0);
  Matrix curr = prev;
  // Position of (-1, 4) in the dynamic layout: no wavelets at -2 precede it.
  curr(2, 0) = 10.0;
  AdaptConfig cfg;
  auto r = adapt_aq3d(state, 3, prev, curr, Matrix(), 7, cfg);
  for (int k : refinement_indices(3, 4, wt->wavelet_count(-2))) {
    EXPECT_TRUE(r.state.contains(-2, k));
    EXPECT_EQ(r.state.keep_until(-2, k), 7 + cfg.n_keep);
  }
  EXPECT_EQ(r.added, static_cast<int>(refinement_indices(3, 4, wt->wavelet_count(-2)).size()));
  // Shared layout: every edge carries the new functions, starting at zero.
  EXPECT_EQ(r.u.cols(), r.state.size());
  for (int n = 0; n < 5; ++n) {
    EXPECT_EQ(r.u.row(n).head(r.added).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(r.u(n, r.added), curr(n, 0));
  }
}

TEST(AdaptAQ3D, FunctionSurvivesWhileAnyEdgeNeedsIt) {
  auto wt = transform(3, 8.0, -2, 0);
  auto state = ResolutionState::empty(*wt);
  state.insert(0, 2);
  Matrix u = Matrix::Zero(4, state.size());
  u.rightCols(state.scaling_count()).setConstant(1.0);
  AdaptConfig cfg;
  cfg.fact = std::numeric_limits<double>::infinity();
  u(3, 0) = 1.0;
  EXPECT_TRUE(adapt_aq3d(state, 3, u, u, Matrix(), 1, cfg).state.contains(0, 2));
  u(3, 0) = 0.0;
  auto r = adapt_aq3d(state, 3, u, u, Matrix(), 1, cfg);
  EXPECT_FALSE(r.state.contains(0, 2));
  EXPECT_EQ(r.removed, 1);
}

TEST(AdaptAQ3D, SourceWaveletsFromAnyEdge) {
  auto wt = transform(3, 8.0, -1, 0);
  auto state = ResolutionState::empty(*wt);
  Matrix u = Matrix::Zero(3, state.size());
  Matrix source = Matrix::Zero(3, wt->size());
  source(1, wt->wavelet_offset(-1) + 5) = 1.0;
  AdaptConfig cfg;
  auto r = adapt_aq3d(state, 3, u, u, source, 1, cfg);
  EXPECT_TRUE(r.state.contains(-1, 5));
  EXPECT_EQ(r.state.size(), state.size() + 1);
}

TEST(InitialResolutionAQ3D, UnionOfEdgeThresholds) {
  auto wt = transform(3, 8.0, -1, 0);
  Matrix u = Matrix::Zero(2, wt->size());
  u(0, wt->wavelet_offset(0) + 1) = 1.0;
  u(1, wt->wavelet_offset(-1) + 3) = -1.0;
  AdaptConfig cfg;
  auto s = initial_resolution_aq3d(u, Matrix(), *wt, cfg);
  EXPECT_TRUE(s.contains(0, 1));
  EXPECT_TRUE(s.contains(-1, 3));
  EXPECT_EQ(s.size(), wt->scaling_count() + 2);
  EXPECT_THROW(initial_resolution_aq3d(Matrix::Zero(2, 3), Matrix(), *wt, cfg), std::invalid_argument);
}

TEST(SolveAQ3D, FullTuplesReproduceQ3D) {
  auto p = small_problem();
  auto wt = transform(6, 8.0, -2, -1);
  AQ3DOptions ao;
  ao.start_full = true;
  ao.keep_states = true;
  ao.probes = {{"c", 0.4, 0.6, 3.1}};
  AdaptConfig cfg;
  cfg.tol_u = 0.0;
  cfg.fact = std::numeric_limits<double>::infinity();
  auto a = solve_aq3d(p, cfg, wt, 0.05, 6, ao);
  Q3DOptions qo;
  qo.keep_states = true;
  qo.probes = ao.probes;
  auto q = solve_q3d(p, wt->finest(), 0.05, 6, qo);
  ASSERT_EQ(a.states.size(), q.states.size());
  for (std::size_t s = 0; s < q.states.size(); ++s) {
    EXPECT_LT((a.states[s] - q.states[s]).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(a.probe_values[0][s], q.probe_values[0][s], 1e-10);
  }
  for (const auto& d : a.log) EXPECT_EQ(d.active_dofs, d.max_dofs);
  EXPECT_EQ(a.refactorizations, 1);
  EXPECT_EQ(a.checksum_start, a.checksum_end);
}

TEST(SolveAQ3D, AdaptiveRunStaysBelowTheCeiling) {
  auto p = small_problem();
  auto wt = transform(6, 8.0, -3, -1);
  AdaptConfig cfg;
  cfg.tol_u = 1e-3;
  AQ3DOptions o;
  o.probes = {{"c", 0.5, 0.5, 3.0}};
  auto r = solve_aq3d(p, cfg, wt, 0.05, 10, o);
  ASSERT_EQ(r.log.size(), 11u);
  for (const auto& d : r.log) {
    EXPECT_LT(d.active_dofs, d.max_dofs);
    EXPECT_EQ(d.active_dofs % 9, 0);
  }
  EXPECT_EQ(r.checksum_start, r.checksum_end);
  // The coarse resolution still follows the full solution closely.
  Q3DOptions qo;
  qo.probes = o.probes;
  auto q = solve_q3d(p, wt->finest(), 0.05, 10, qo);
  EXPECT_NEAR(r.probe_values[0].back(), q.probe_values[0].back(), 1e-2 * std::abs(q.probe_values[0].back()));
}

TEST(SolveAQ3D, ZeroStepsReturnTheProjection) {
  auto p = small_problem();
  auto wt = transform(3, 8.0, -1, 0);
  AdaptConfig cfg;
  cfg.tol_u = 0.0;
  AQ3DOptions o;
  auto r = solve_aq3d(p, cfg, wt, 0.1, 0, o);
  ASSERT_EQ(r.states.size(), 1u);
  auto scale = assemble_q3d(p, wt->finest());
  EXPECT_LT((r.states[0] - initial_coefficients(p, wt->finest(), scale)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(solve_aq3d(p, cfg, wt, 0.1, -1, o), ConfigError);
  EXPECT_THROW(solve_aq3d(p, cfg, wt, 0.0, 1, o), ConfigError);
}

TEST(SolveAQ3D, VerificationErrorFallsWithRefinement) {
  double previous = 1e300;
  const std::pair<int, int> levels[] = {{6, -1}, {12, -2}};
  for (auto [cells, jmin] : levels) {
    HeatProblem3D p;
    p.mesh = rectangle_mesh(0.0, 1.0, 0.0, 1.0, cells, cells, {10.0, 5.0});
    p.length = 10.0;
    p.initial_xy = [](double x, double y) { return std::cos(pi * x) * std::cos(pi * y); };
    p.initial_z = [](double z) { return std::sin(8 * pi * z / 10.0); };
    auto wt = transform(6, 10.0, jmin, -1);
    AdaptConfig cfg;
    AQ3DOptions o;
    auto r = solve_aq3d(p, cfg, wt, 1e-4, 10, o);
    Sampler sample(p.mesh, wt->finest());
    std::vector<double> zs;
    for (int i = 0; i <= 100; ++i) zs.push_back(0.1 * i);
    double err = 0.0;
    const double decay = std::exp(-2.0 * pi * pi * 2.64 * 1e-3);
    for (int n = 0; n < p.mesh.node_count(); ++n) {
      const auto& nd = p.mesh.nodes[n];
      Vector prof = sample.z_profile(r.states.back(), nd.x, nd.y, zs);
      for (std::size_t k = 0; k < zs.size(); ++k)
        err = std::max(err, std::abs(prof[k] - std::cos(pi * nd.x) * std::cos(pi * nd.y) *
                                                   std::sin(8 * pi * zs[k] / 10.0) * decay));
    }
    EXPECT_LT(err, previous);
    previous = err;
  }
}

TEST(DofLogCsv, HasHeaderAndRows) {
  auto path = std::filesystem::temp_directory_path() / "q3dw_dof_log" / "dofs.csv";
  write_dof_log_csv(path, {{0, 0.0, 90, 180, 0, 0}, {1, 0.5, 99, 180, 1, 0}});
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,time,active_dofs,max_dofs,added,removed");
  std::getline(in, line);
  EXPECT_EQ(line, "0,0,90,180,0,0");
  std::filesystem::remove_all(path.parent_path());
}
