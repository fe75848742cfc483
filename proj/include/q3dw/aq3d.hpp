#pragma once

#include "q3dw/adaptive_1d.hpp"
#include "q3dw/q3d.hpp"

namespace q3dw {

// Static tensor system at scale jmin-1 with the longitudinal factors in the
// wavelet frame of wt. The Kronecker products are never materialized; the
// factor matrices are the precomputed middle terms.
struct AQ3DStatic {
  std::shared_ptr<const WaveletTransform> wt;
  Q3DSystem system;

  // FNV-1a over every factor matrix; unchanged for the whole run.
  std::uint64_t checksum() const;
};

AQ3DStatic build_aq3d_static(const HeatProblem3D& problem, std::shared_ptr<const WaveletTransform> wt,
                             int quad_depth = 12);

std::uint64_t checksum(const Q3DSystem& system);

// Q = I_anzfe (x) T.
SparseMatrix q_matrix(int anzfe, const TransformSet& transform);

// Longitudinal factors conjugated by T; the cross-section factors are shared.
Q3DSystem assemble_aq3d(const AQ3DStatic& mid, const TransformSet& transform);

// Union over edges of the threshold rule on the rows of u (anzfe x anz_{jmin-1},
// wavelet frame) and of the source rule on the rows of source (may be empty).
ResolutionState initial_resolution_aq3d(const Matrix& u, const Matrix& source, const WaveletTransform& wt,
                                        const AdaptConfig& config);

struct AQ3DAdaptResult {
  ResolutionState state;
  Matrix u;
  int added = 0;
  int removed = 0;
};

// Runs the 1-D rules on every edge (row) and merges the proposals and the
// source tuples into one shared resolution. u_prev and u_curr are in the
// dynamic layout of state; source is in the static wavelet layout or empty.
AQ3DAdaptResult adapt_aq3d(const ResolutionState& state, int vanishing_moments, const Matrix& u_prev,
                           const Matrix& u_curr, const Matrix& source, int step, const AdaptConfig& config);

struct DofRecord {
  int step = 0;
  double time = 0.0;
  long long active_dofs = 0;
  long long max_dofs = 0;
  int added = 0;
  int removed = 0;
};

struct AQ3DOptions {
  int quad_depth = 12;
  std::vector<Probe> probes;
  bool keep_states = false;
  bool start_full = false;
  TensorStepper::Method method = TensorStepper::Method::automatic;
};

struct AQ3DResult {
  std::vector<double> times;
  std::vector<std::vector<double>> probe_values;  // [probe][time]
  // Coefficients at scale jmin-1 (comparable with solve_q3d there); all
  // steps when keep_states, else the last one.
  std::vector<Matrix> states;
  std::vector<DofRecord> log;
  std::uint64_t checksum_start = 0, checksum_end = 0;
  int refactorizations = 0;
};

AQ3DResult solve_aq3d(const HeatProblem3D& problem, const AdaptConfig& config,
                      std::shared_ptr<const WaveletTransform> wt, double dt, int n_steps,
                      const AQ3DOptions& options = {});

// CSV: step,time,active_dofs,max_dofs,added,removed.
void write_dof_log_csv(const std::filesystem::path& path, const std::vector<DofRecord>& log);

}  // namespace q3dw
