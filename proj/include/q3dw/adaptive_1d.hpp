#pragma once

#include "q3dw/fwt.hpp"
#include "q3dw/spectral_1d.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>

namespace q3dw {

struct AdaptConfig {
  double tol_u = 1e-8;
  double fact = 2.0;
  int n_keep = 10;

  // tol_u = 0 and fact = inf are accepted: together they disable adaptation.
  void validate() const;
};

// Active wavelets per scale of a WaveletTransform. Indices are 0-based
// positions inside each scale's wavelet block; the anz_jmax scaling functions
// are always active and not stored.
class ResolutionState {
 public:
  ResolutionState() = default;
  ResolutionState(int jmin, int jmax, std::vector<int> wavelet_counts, int scaling_count);

  // Empty or complete tuples for the scales of a transform.
  static ResolutionState empty(const WaveletTransform& wt);
  static ResolutionState full(const WaveletTransform& wt);

  int jmin() const { return jmin_; }
  int jmax() const { return jmax_; }
  int levels() const { return jmax_ - jmin_ + 1; }
  int wavelet_count(int j) const { return counts_.at(j - jmin_); }
  int scaling_count() const { return scaling_count_; }

  const std::vector<int>& tuple(int j) const { return active_.at(j - jmin_); }
  bool contains(int j, int k) const;
  // Adds k at scale j; an existing entry keeps the later protection step.
  void insert(int j, int k, int keep_until = 0);
  void erase(int j, int k);
  int keep_until(int j, int k) const { return keep_.at(j - jmin_).at(k); }

  // eta = anz_jmax + sum eta_j
  int size() const;
  // anz_{jmin-1}
  int max_size() const;

  // Position of wavelet (j, k) in the complete static layout of the transform.
  int static_index(int j, int k) const;
  // Static positions of all active functions, in dynamic order.
  std::vector<int> static_indices() const;

  // Identifies the active set; protection windows are ignored.
  std::uint64_t hash() const;
  bool same_functions(const ResolutionState& other) const { return active_ == other.active_; }

 private:
  void check_scale(int j) const;

  int jmin_ = 0, jmax_ = -1;
  std::vector<int> counts_;
  int scaling_count_ = 0;
  std::vector<std::vector<int>> active_;
  std::vector<std::vector<int>> keep_;
};

struct TransformSet {
  // eta_j x (wavelet count at j) unit-row selections.
  std::vector<SparseMatrix> per_scale;
  // eta x anz_{jmin-1}: blocks T_jmin .. T_jmax, then the scaling identity.
  SparseMatrix full;
};

// Throws std::invalid_argument on duplicate or out-of-range indices.
TransformSet build_transform(const ResolutionState& state);

// Threshold rule on the wavelet coefficients of theta0.
ResolutionState initial_resolution(const ScalarFunction& theta0, const WaveletTransform& wt, const AdaptConfig& config,
                                   int quad_depth = 12);
// Same rule on coefficients already in the static wavelet layout.
ResolutionState threshold_resolution(const Vector& static_coeffs, const WaveletTransform& wt, double tol_u);

// Conjugates a scale-(jmin-1) system by the complete transform W.
SemiDiscreteSystem to_wavelet_frame(const SemiDiscreteSystem& scale_system, const WaveletTransform& wt);

// A_d = T A_s T^T, M_d = T M_s T^T, B_d = B_s T^T, rhs_d = T rhs_s.
SemiDiscreteSystem derive_dynamic_system(const SemiDiscreteSystem& static_system, const TransformSet& transform);

// Indices {-N+1+2k, ..., N+2k} clipped to [0, count).
std::vector<int> refinement_indices(int n, int k, int count);

// Removal and flow-driven addition for one coefficient history; u_prev and
// u_curr are in the dynamic layout of state.
ResolutionState propose(const ResolutionState& state, int vanishing_moments, const Vector& u_prev,
                        const Vector& u_curr, int step, const AdaptConfig& config);

// Adds every wavelet whose static-frame source coefficient exceeds tol_u.
void add_source_wavelets(ResolutionState& state, const Vector& source_static, double tol_u, int keep_until = 0);

// Union of active sets; protection windows take the later step.
ResolutionState merge(const ResolutionState& a, const ResolutionState& b);

// Coefficients of u (dynamic layout of from) in the layout of to: retained
// functions keep their values, new ones start at zero.
Vector carry_over(const ResolutionState& from, const ResolutionState& to, const Vector& u);

struct AdaptResult {
  ResolutionState state;
  Vector u;
  int added = 0;
  int removed = 0;
};

// One adaptation: propose, union with the source wavelets (empty vector for
// none), carry u_curr into the new layout.
AdaptResult adapt(const ResolutionState& state, int vanishing_moments, const Vector& u_prev, const Vector& u_curr,
                  const Vector& source_static, int step, const AdaptConfig& config);

struct StepRecord {
  int step = 0;
  double time = 0.0;
  int eta = 0;
  int added = 0;
  int removed = 0;
};

struct AdaptiveTrajectory {
  std::vector<double> times;
  // Scaling coefficients at scale jmin-1, comparable with a static solve there.
  std::vector<Vector> coefficients;
  std::vector<StepRecord> log;
};

struct AdaptiveOptions {
  int quad_depth = 12;
  // Start from every wavelet instead of the threshold rule.
  bool start_full = false;
};

AdaptiveTrajectory solve_adaptive(const HeatProblem1D& problem, const AdaptConfig& config,
                                  std::shared_ptr<const WaveletTransform> wt, double dt, int n_steps,
                                  const AdaptiveOptions& options = {});

// CSV: step,time,eta,added,removed.
void write_step_log_csv(const std::filesystem::path& path, const std::vector<StepRecord>& log);

}  // namespace q3dw
