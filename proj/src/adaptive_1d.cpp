#include "q3dw/adaptive_1d.hpp"

#include "io_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace q3dw {

void AdaptConfig::validate() const {
  if (!(tol_u >= 0.0)) throw ConfigError("tol_u must be non-negative");
  if (!(fact > 1.0)) throw ConfigError("fact must be greater than 1");
  if (n_keep < 1) throw ConfigError("n_keep must be at least 1");
}

ResolutionState::ResolutionState(int jmin, int jmax, std::vector<int> wavelet_counts, int scaling_count)
    : jmin_(jmin), jmax_(jmax), counts_(std::move(wavelet_counts)), scaling_count_(scaling_count) {
  if (jmin > jmax) throw std::invalid_argument("jmin must not exceed jmax");
  if (static_cast<int>(counts_.size()) != jmax - jmin + 1)
    throw std::invalid_argument("one wavelet count per scale expected");
  active_.resize(counts_.size());
  keep_.resize(counts_.size());
  for (std::size_t l = 0; l < counts_.size(); ++l) keep_[l].assign(counts_[l], 0);
}

ResolutionState ResolutionState::empty(const WaveletTransform& wt) {
  std::vector<int> counts;
  for (int j = wt.jmin(); j <= wt.jmax(); ++j) counts.push_back(wt.wavelet_count(j));
  return ResolutionState(wt.jmin(), wt.jmax(), counts, wt.scaling_count());
}

ResolutionState ResolutionState::full(const WaveletTransform& wt) {
  ResolutionState s = empty(wt);
  for (int j = s.jmin(); j <= s.jmax(); ++j)
    for (int k = 0; k < s.wavelet_count(j); ++k) s.active_[j - s.jmin_].push_back(k);
  return s;
}

void ResolutionState::check_scale(int j) const {
  if (j < jmin_ || j > jmax_) throw std::out_of_range("scale outside resolution range");
}

bool ResolutionState::contains(int j, int k) const {
  check_scale(j);
  const auto& a = active_[j - jmin_];
  return std::binary_search(a.begin(), a.end(), k);
}

void ResolutionState::insert(int j, int k, int keep_until) {
  check_scale(j);
  const int l = j - jmin_;
  if (k < 0 || k >= counts_[l]) throw std::out_of_range("wavelet index out of range");
  auto& a = active_[l];
  auto it = std::lower_bound(a.begin(), a.end(), k);
  if (it == a.end() || *it != k) a.insert(it, k);
  keep_[l][k] = std::max(keep_[l][k], keep_until);
}

void ResolutionState::erase(int j, int k) {
  check_scale(j);
  auto& a = active_[j - jmin_];
  auto it = std::lower_bound(a.begin(), a.end(), k);
  if (it != a.end() && *it == k) a.erase(it);
}

int ResolutionState::size() const {
  int n = scaling_count_;
  for (const auto& a : active_) n += static_cast<int>(a.size());
  return n;
}

int ResolutionState::max_size() const {
  int n = scaling_count_;
  for (int c : counts_) n += c;
  return n;
}

int ResolutionState::static_index(int j, int k) const {
  check_scale(j);
  int offset = 0;
  for (int l = 0; l < j - jmin_; ++l) offset += counts_[l];
  return offset + k;
}

std::vector<int> ResolutionState::static_indices() const {
  std::vector<int> idx;
  idx.reserve(size());
  int offset = 0;
  for (std::size_t l = 0; l < active_.size(); ++l) {
    for (int k : active_[l]) idx.push_back(offset + k);
    offset += counts_[l];
  }
  for (int i = 0; i < scaling_count_; ++i) idx.push_back(offset + i);
  return idx;
}

std::uint64_t ResolutionState::hash() const {
  // FNV-1a over (level, index) pairs.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint64_t>(jmin_ + 1024));
  mix(static_cast<std::uint64_t>(jmax_ + 1024));
  for (std::size_t l = 0; l < active_.size(); ++l) {
    mix(0xfffffffful);
    for (int k : active_[l]) mix(static_cast<std::uint64_t>(k));
  }
  return h;
}

TransformSet build_transform(const ResolutionState& state) {
  TransformSet ts;
  std::vector<Triplet> trip;
  int row = 0, offset = 0;
  const int total = state.max_size();
  for (int j = state.jmin(); j <= state.jmax(); ++j) {
    const auto& tuple = state.tuple(j);
    const int count = state.wavelet_count(j);
    std::vector<Triplet> local;
    for (std::size_t i = 0; i < tuple.size(); ++i) {
      const int k = tuple[i];
      if (k < 0 || k >= count) throw std::invalid_argument("wavelet index out of range in resolution state");
      if (i > 0 && tuple[i - 1] >= k) throw std::invalid_argument("duplicate or unsorted index in resolution state");
      local.emplace_back(static_cast<int>(i), k, 1.0);
      trip.emplace_back(row++, offset + k, 1.0);
    }
    SparseMatrix t(static_cast<int>(tuple.size()), count);
    t.setFromTriplets(local.begin(), local.end());
    ts.per_scale.push_back(std::move(t));
    offset += count;
  }
  for (int i = 0; i < state.scaling_count(); ++i) trip.emplace_back(row++, offset + i, 1.0);
  ts.full.resize(row, total);
  ts.full.setFromTriplets(trip.begin(), trip.end());
  return ts;
}

ResolutionState threshold_resolution(const Vector& static_coeffs, const WaveletTransform& wt, double tol_u) {
  if (static_coeffs.size() != wt.size()) throw std::invalid_argument("coefficient vector does not match transform");
  ResolutionState s = ResolutionState::empty(wt);
  add_source_wavelets(s, static_coeffs, tol_u);
  return s;
}

ResolutionState initial_resolution(const ScalarFunction& theta0, const WaveletTransform& wt, const AdaptConfig& config,
                                   int quad_depth) {
  Vector v = wt.finest().project(theta0, quad_depth);
  return threshold_resolution(wt.forward(v), wt, config.tol_u);
}

SemiDiscreteSystem to_wavelet_frame(const SemiDiscreteSystem& sys, const WaveletTransform& wt) {
  if (sys.dof_count() != wt.size()) throw std::invalid_argument("system size does not match transform");
  const SparseMatrix& w = wt.matrix();
  SparseMatrix wt_t = w.transpose();
  SemiDiscreteSystem out;
  out.A = w * sys.A * wt_t;
  out.M = w * sys.M * wt_t;
  out.B = sys.B * wt_t;
  out.A.prune(1e-16, 1.0);
  out.M.prune(1e-16, 1.0);
  out.B.prune(1e-16, 1.0);
  auto rhs = sys.rhs;
  auto wp = std::make_shared<const SparseMatrix>(w);
  out.rhs = [rhs, wp](double t) { return Vector(*wp * rhs(t)); };
  out.b = sys.b;
  return out;
}

SemiDiscreteSystem derive_dynamic_system(const SemiDiscreteSystem& s, const TransformSet& transform) {
  const SparseMatrix& t = transform.full;
  if (t.cols() != s.dof_count() || s.A.rows() != s.A.cols() || s.B.cols() != t.cols()) {
    std::ostringstream msg;
    msg << "transform with " << t.cols() << " columns does not match static system of size " << s.dof_count();
    throw std::invalid_argument(msg.str());
  }
  SparseMatrix tt = t.transpose();
  SemiDiscreteSystem d;
  d.A = t * s.A * tt;
  d.M = t * s.M * tt;
  d.B = s.B * tt;
  auto rhs = s.rhs;
  auto tp = std::make_shared<const SparseMatrix>(t);
  d.rhs = [rhs, tp](double time) { return Vector(*tp * rhs(time)); };
  d.b = s.b;
  return d;
}

std::vector<int> refinement_indices(int n, int k, int count) {
  std::vector<int> idx;
  for (int i = std::max(0, -n + 1 + 2 * k); i <= std::min(count - 1, n + 2 * k); ++i) idx.push_back(i);
  return idx;
}

ResolutionState propose(const ResolutionState& state, int vanishing_moments, const Vector& u_prev,
                        const Vector& u_curr, int step, const AdaptConfig& config) {
  if (u_prev.size() != state.size() || u_curr.size() != state.size())
    throw std::invalid_argument("coefficient vectors do not match the resolution state");
  ResolutionState next = state;
  int pos = 0;
  for (int j = state.jmin(); j <= state.jmax(); ++j) {
    for (int k : state.tuple(j)) {
      const double before = std::abs(u_prev(pos)), after = std::abs(u_curr(pos));
      ++pos;
      if (after < config.tol_u && step >= state.keep_until(j, k)) next.erase(j, k);
      if (j > state.jmin()) {
        const double ratio = std::max(before, after) / std::max(before, config.tol_u);
        if (ratio >= config.fact)
          for (int i : refinement_indices(vanishing_moments, k, state.wavelet_count(j - 1)))
            next.insert(j - 1, i, step + config.n_keep);
      }
    }
  }
  // Re-add anything the removal pass dropped but a refinement protected.
  for (int j = state.jmin(); j <= state.jmax(); ++j)
    for (int k : state.tuple(j))
      if (!next.contains(j, k) && next.keep_until(j, k) > step) next.insert(j, k);
  return next;
}

void add_source_wavelets(ResolutionState& state, const Vector& source_static, double tol_u, int keep_until) {
  if (source_static.size() == 0) return;
  if (source_static.size() != state.max_size()) throw std::invalid_argument("source vector does not match transform");
  for (int j = state.jmin(); j <= state.jmax(); ++j) {
    const int offset = state.static_index(j, 0);
    for (int k = 0; k < state.wavelet_count(j); ++k)
      if (std::abs(source_static(offset + k)) > tol_u) state.insert(j, k, keep_until);
  }
}

ResolutionState merge(const ResolutionState& a, const ResolutionState& b) {
  if (a.jmin() != b.jmin() || a.jmax() != b.jmax() || a.max_size() != b.max_size())
    throw std::invalid_argument("cannot merge resolutions of different transforms");
  ResolutionState out = a;
  for (int j = b.jmin(); j <= b.jmax(); ++j)
    for (int k : b.tuple(j)) out.insert(j, k, b.keep_until(j, k));
  return out;
}

Vector carry_over(const ResolutionState& from, const ResolutionState& to, const Vector& u) {
  if (u.size() != from.size()) throw std::invalid_argument("coefficient vector does not match the resolution state");
  std::vector<int> src = from.static_indices(), dst = to.static_indices();
  Vector out = Vector::Zero(to.size());
  std::size_t i = 0;
  for (std::size_t d = 0; d < dst.size(); ++d) {
    while (i < src.size() && src[i] < dst[d]) ++i;
    if (i < src.size() && src[i] == dst[d]) out(static_cast<int>(d)) = u(static_cast<int>(i));
  }
  return out;
}

AdaptResult adapt(const ResolutionState& state, int vanishing_moments, const Vector& u_prev, const Vector& u_curr,
                  const Vector& source_static, int step, const AdaptConfig& config) {
  AdaptResult r;
  r.state = propose(state, vanishing_moments, u_prev, u_curr, step, config);
  add_source_wavelets(r.state, source_static, config.tol_u);
  for (int j = state.jmin(); j <= state.jmax(); ++j) {
    for (int k : state.tuple(j))
      if (!r.state.contains(j, k)) ++r.removed;
    for (int k : r.state.tuple(j))
      if (!state.contains(j, k)) ++r.added;
  }
  r.u = carry_over(state, r.state, u_curr);
  return r;
}

AdaptiveTrajectory solve_adaptive(const HeatProblem1D& problem, const AdaptConfig& config,
                                  std::shared_ptr<const WaveletTransform> wt, double dt, int n_steps,
                                  const AdaptiveOptions& options) {
  config.validate();
  if (n_steps < 0) throw std::invalid_argument("step count must be non-negative");
  const IntervalBasis& finest = wt->finest();
  const int n = finest.family().vanishing_moments();
  SemiDiscreteSystem scale_sys = assemble(problem, finest, options.quad_depth);
  SemiDiscreteSystem static_sys = to_wavelet_frame(scale_sys, *wt);
  Vector u_static = wt->forward(initial_coefficients(problem, finest, scale_sys, options.quad_depth));

  ResolutionState state =
      options.start_full ? ResolutionState::full(*wt) : threshold_resolution(u_static, *wt, config.tol_u);
  const bool has_source = static_cast<bool>(problem.source);
  Vector fixed_source;
  if (has_source && !problem.source_time_dependent) fixed_source = static_sys.rhs(0.0);
  if (has_source) add_source_wavelets(state, problem.source_time_dependent ? static_sys.rhs(0.0) : fixed_source,
                                      config.tol_u);

  TransformSet ts = build_transform(state);
  Vector u = ts.full * u_static;
  AdaptiveTrajectory traj;
  auto record = [&](double time, const Vector& ud, int step, int added, int removed) {
    traj.times.push_back(time);
    traj.coefficients.push_back(wt->inverse(ts.full.transpose() * ud));
    traj.log.push_back({step, time, static_cast<int>(ud.size()), added, removed});
  };
  record(0.0, u, 0, 0, 0);
  if (n_steps == 0) return traj;

  auto dyn = derive_dynamic_system(static_sys, ts);
  auto stepper = std::make_unique<ImplicitEulerStepper>(dyn, dt);
  std::uint64_t current = state.hash();
  for (int i = 0; i < n_steps; ++i) {
    const double t_next = (i + 1) * dt;
    Vector u_next = stepper->step(u, dyn.rhs(t_next), dyn.b(t_next));
    record(t_next, u_next, i + 1, 0, 0);

    Vector source;
    if (has_source) source = problem.source_time_dependent ? static_sys.rhs(t_next) : fixed_source;
    AdaptResult r = adapt(state, n, u, u_next, source, i + 1, config);
    traj.log.back().added = r.added;
    traj.log.back().removed = r.removed;
    state = std::move(r.state);
    u = std::move(r.u);
    if (state.hash() != current) {
      current = state.hash();
      ts = build_transform(state);
      dyn = derive_dynamic_system(static_sys, ts);
      stepper = std::make_unique<ImplicitEulerStepper>(dyn, dt);
    }
  }
  return traj;
}

void write_step_log_csv(const std::filesystem::path& path, const std::vector<StepRecord>& log) {
  auto out = detail::open_output(path);
  out << "step,time,eta,added,removed\n";
  for (const auto& r : log) out << r.step << "," << r.time << "," << r.eta << "," << r.added << "," << r.removed << "\n";
  detail::check_written(out, path);
}

}  // namespace q3dw
