#include "q3dw/aq3d.hpp"

#include "io_util.hpp"

#include <cstring>

namespace q3dw {

namespace {

void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

void hash_matrix(std::uint64_t& h, const SparseMatrix& m) {
  SparseMatrix c = m;
  c.makeCompressed();
  const Eigen::Index dims[2] = {c.rows(), c.cols()};
  hash_bytes(h, dims, sizeof dims);
  hash_bytes(h, c.outerIndexPtr(), sizeof(int) * (c.outerSize() + 1));
  hash_bytes(h, c.innerIndexPtr(), sizeof(int) * c.nonZeros());
  hash_bytes(h, c.valuePtr(), sizeof(double) * c.nonZeros());
}

SparseMatrix conjugate(const SparseMatrix& t, const SparseMatrix& m) {
  SparseMatrix out = t * m * SparseMatrix(t.transpose());
  out.prune(1e-16, 1.0);
  return out;
}

// Column-wise maxima of |m|; empty for an empty matrix.
Vector column_max(const Matrix& m) {
  if (m.size() == 0) return {};
  return m.cwiseAbs().colwise().maxCoeff().transpose();
}

}  // namespace

std::uint64_t checksum(const Q3DSystem& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const SparseMatrix* m : {&s.fe_A, &s.fe_M_cv, &s.fe_M_lambda, &s.z_A, &s.z_M_lambda, &s.z_M_cv, &s.z_B})
    hash_matrix(h, *m);
  return h;
}

std::uint64_t AQ3DStatic::checksum() const { return q3dw::checksum(system); }

AQ3DStatic build_aq3d_static(const HeatProblem3D& problem, std::shared_ptr<const WaveletTransform> wt,
                             int quad_depth) {
  Q3DSystem s = assemble_q3d(problem, wt->finest(), quad_depth);
  const SparseMatrix& w = wt->matrix();
  SparseMatrix wt_t = w.transpose();
  s.z_A = conjugate(w, s.z_A);
  s.z_M_lambda = conjugate(w, s.z_M_lambda);
  s.z_M_cv = conjugate(w, s.z_M_cv);
  s.z_B = s.z_B * wt_t;
  s.z_B.prune(1e-16, 1.0);
  auto wp = std::make_shared<const SparseMatrix>(wt_t);
  auto hull = s.hull_values;
  auto rhs = s.rhs;
  // Coefficient rows transform as v -> W v, i.e. U -> U W^T.
  if (!s.hull_nodes.empty()) s.hull_values = [hull, wp](double t) { return Matrix(hull(t) * *wp); };
  s.rhs = [rhs, wp](double t) { return Matrix(rhs(t) * *wp); };
  return {std::move(wt), std::move(s)};
}

SparseMatrix q_matrix(int anzfe, const TransformSet& transform) {
  SparseMatrix id(anzfe, anzfe);
  id.setIdentity();
  return kron(id, transform.full);
}

Q3DSystem assemble_aq3d(const AQ3DStatic& mid, const TransformSet& transform) {
  const SparseMatrix& t = transform.full;
  const Q3DSystem& s = mid.system;
  if (t.cols() != s.anz) throw std::invalid_argument("transform does not match the static longitudinal size");
  Q3DSystem d = s;
  d.anz = static_cast<int>(t.rows());
  d.z_A = conjugate(t, s.z_A);
  d.z_M_lambda = conjugate(t, s.z_M_lambda);
  d.z_M_cv = conjugate(t, s.z_M_cv);
  SparseMatrix tt = t.transpose();
  d.z_B = s.z_B * tt;
  auto tp = std::make_shared<const SparseMatrix>(tt);
  auto hull = s.hull_values;
  auto rhs = s.rhs;
  if (!s.hull_nodes.empty()) d.hull_values = [hull, tp](double time) { return Matrix(hull(time) * *tp); };
  d.rhs = [rhs, tp](double time) { return Matrix(rhs(time) * *tp); };
  return d;
}

ResolutionState initial_resolution_aq3d(const Matrix& u, const Matrix& source, const WaveletTransform& wt,
                                        const AdaptConfig& config) {
  if (u.cols() != wt.size()) throw std::invalid_argument("coefficients do not match the transform");
  // The union of per-edge threshold sets is the threshold set of the column maxima.
  ResolutionState state = threshold_resolution(column_max(u), wt, config.tol_u);
  add_source_wavelets(state, column_max(source), config.tol_u);
  return state;
}

AQ3DAdaptResult adapt_aq3d(const ResolutionState& state, int vanishing_moments, const Matrix& u_prev,
                           const Matrix& u_curr, const Matrix& source, int step, const AdaptConfig& config) {
  if (u_prev.rows() != u_curr.rows() || u_prev.cols() != state.size() || u_curr.cols() != state.size())
    throw std::invalid_argument("coefficients do not match the resolution state");
  AQ3DAdaptResult r;
  // Start from the functions every edge would drop, so the union only grows.
  r.state = state;
  for (int j = state.jmin(); j <= state.jmax(); ++j)
    for (int k : std::vector<int>(state.tuple(j))) r.state.erase(j, k);
  for (Eigen::Index n = 0; n < u_curr.rows(); ++n) {
    ResolutionState edge =
        propose(state, vanishing_moments, u_prev.row(n).transpose(), u_curr.row(n).transpose(), step, config);
    r.state = merge(r.state, edge);
  }
  add_source_wavelets(r.state, column_max(source), config.tol_u);
  for (int j = state.jmin(); j <= state.jmax(); ++j) {
    for (int k : state.tuple(j))
      if (!r.state.contains(j, k)) ++r.removed;
    for (int k : r.state.tuple(j))
      if (!state.contains(j, k)) ++r.added;
  }
  r.u.resize(u_curr.rows(), r.state.size());
  for (Eigen::Index n = 0; n < u_curr.rows(); ++n)
    r.u.row(n) = carry_over(state, r.state, u_curr.row(n).transpose()).transpose();
  return r;
}

AQ3DResult solve_aq3d(const HeatProblem3D& problem, const AdaptConfig& config,
                      std::shared_ptr<const WaveletTransform> wt, double dt, int n_steps, const AQ3DOptions& options) {
  config.validate();
  if (n_steps < 0) throw ConfigError("n_steps must be non-negative");
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  const IntervalBasis& finest = wt->finest();
  const int n_moments = finest.family().vanishing_moments();

  AQ3DStatic mid = build_aq3d_static(problem, wt, options.quad_depth);
  AQ3DResult r;
  r.checksum_start = mid.checksum();
  const SparseMatrix& w = wt->matrix();
  const SparseMatrix w_t = w.transpose();
  const int anzfe = mid.system.anzfe;
  const long long max_dofs = static_cast<long long>(anzfe) * wt->size();

  // Scale-frame initial coefficients, constrained in the static system.
  Q3DSystem scale_sys = assemble_q3d(problem, finest, options.quad_depth);
  Matrix u_static = initial_coefficients(problem, finest, scale_sys, options.quad_depth) * w_t;

  const bool has_source = problem.has_source();
  Matrix fixed_source;
  if (has_source && !problem.source_time_dependent) fixed_source = mid.system.rhs(0.0);
  auto source_at = [&](double t) { return !has_source ? Matrix() : problem.source_time_dependent ? mid.system.rhs(t) : fixed_source; };

  ResolutionState state = options.start_full ? ResolutionState::full(*wt)
                                             : initial_resolution_aq3d(u_static, source_at(0.0), *wt, config);
  TransformSet ts = build_transform(state);
  Matrix u = u_static * SparseMatrix(ts.full.transpose());

  // Probe values: theta = e^T U (T W phi(z)) with e the FE interpolation weights.
  std::vector<Vector> probe_z;
  for (const auto& p : options.probes) probe_z.push_back(w * finest.values_at(p.z));
  r.probe_values.resize(options.probes.size());
  auto record = [&](double time, int step, int added, int removed) {
    r.times.push_back(time);
    for (std::size_t p = 0; p < options.probes.size(); ++p)
      r.probe_values[p].push_back(
          evaluate(problem.mesh, u * (ts.full * probe_z[p]), options.probes[p].x, options.probes[p].y));
    if (options.keep_states) r.states.push_back(u * ts.full * w);
    r.log.push_back({step, time, static_cast<long long>(anzfe) * state.size(), max_dofs, added, removed});
  };
  record(0.0, 0, 0, 0);

  if (n_steps > 0) {
    Q3DSystem dyn = assemble_aq3d(mid, ts);
    auto stepper = std::make_unique<TensorStepper>(dyn, dt, options.method);
    r.refactorizations = 1;
    std::uint64_t current = state.hash();
    for (int i = 0; i < n_steps; ++i) {
      const double t_next = (i + 1) * dt;
      Matrix u_next = stepper->step(u, i * dt);
      if (!u_next.allFinite()) throw NumericError("non-finite coefficients at step " + std::to_string(i + 1));
      // Record in the layout the step was computed in, then adapt.
      std::swap(u, u_next);
      record(t_next, i + 1, 0, 0);
      AQ3DAdaptResult a = adapt_aq3d(state, n_moments, u_next, u, source_at(t_next), i + 1, config);
      r.log.back().added = a.added;
      r.log.back().removed = a.removed;
      state = std::move(a.state);
      u = std::move(a.u);
      if (state.hash() != current) {
        current = state.hash();
        ts = build_transform(state);
        dyn = assemble_aq3d(mid, ts);
        stepper = std::make_unique<TensorStepper>(dyn, dt, options.method);
        ++r.refactorizations;
      }
    }
  }
  if (!options.keep_states) r.states.push_back(u * ts.full * w);
  r.checksum_end = mid.checksum();
  return r;
}

void write_dof_log_csv(const std::filesystem::path& path, const std::vector<DofRecord>& log) {
  auto out = detail::open_output(path);
  out << "step,time,active_dofs,max_dofs,added,removed\n";
  for (const auto& d : log)
    out << d.step << ',' << d.time << ',' << d.active_dofs << ',' << d.max_dofs << ',' << d.added << ',' << d.removed
        << '\n';
  detail::check_written(out, path);
}

}  // namespace q3dw
