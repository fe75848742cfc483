#pragma once

#include "q3dw/interval_basis.hpp"

#include <memory>
#include <utility>

namespace q3dw {

using BasisPtr = std::shared_ptr<const IntervalBasis>;

// Orthogonal two-scale step V_{j-1} = V_j + W_j on one interval.
//
// Rows of lowpass() are the coordinates of phi_{j,n} in the orthonormal basis
// of V_{j-1}, rows of highpass() those of psi_{j,k}. Wavelet k has support
// roughly [k-N+1, k+N] 2^j; the first and last N are edge wavelets.
class WaveletStep {
 public:
  WaveletStep(BasisPtr coarse, BasisPtr fine);

  int scale() const { return coarse_->scale(); }
  int coarse_size() const { return coarse_->size(); }
  int fine_size() const { return fine_->size(); }
  int wavelet_count() const { return static_cast<int>(q_.rows()); }
  const IntervalBasis& coarse() const { return *coarse_; }
  const IntervalBasis& fine() const { return *fine_; }

  const SparseMatrix& lowpass() const { return p_; }
  const SparseMatrix& highpass() const { return q_; }

  std::pair<Vector, Vector> forward(const Vector& v) const;
  Vector inverse(const Vector& s, const Vector& w) const;

  double eval_wavelet(int k, double x) const;

 private:
  BasisPtr coarse_, fine_;
  SparseMatrix p_, q_;
};

std::pair<Vector, Vector> fwt_step(const WaveletStep& step, const Vector& v);
Vector ifwt_step(const WaveletStep& step, const Vector& s, const Vector& w);

// Fine-translate coordinates of the coarse translates (two-scale relation).
SparseMatrix refinement_matrix(const WaveletFamily& family, int coarse_count);

// Multilevel transform from scaling coefficients at scale jmin-1 to the
// coefficient layout [w_jmin, w_jmin+1, ..., w_jmax, s_jmax].
class WaveletTransform {
 public:
  WaveletTransform(FamilyPtr family, double length, int jmin, int jmax);

  int jmin() const { return jmin_; }
  int jmax() const { return jmax_; }
  int finest_scale() const { return jmin_ - 1; }
  int size() const { return finest().size(); }

  const IntervalBasis& finest() const { return *bases_.front(); }
  const IntervalBasis& basis(int j) const;
  BasisPtr basis_ptr(int j) const;
  const WaveletStep& step(int j) const;

  int wavelet_count(int j) const { return step(j).wavelet_count(); }
  int wavelet_offset(int j) const;
  int scaling_offset() const { return offsets_.back(); }
  int scaling_count() const { return basis(jmax_).size(); }

  // Orthogonal matrix W with c = W v.
  const SparseMatrix& matrix() const { return w_; }
  Vector forward(const Vector& v) const;
  Vector inverse(const Vector& c) const;

 private:
  int jmin_, jmax_;
  std::vector<BasisPtr> bases_;
  std::vector<std::shared_ptr<const WaveletStep>> steps_;
  std::vector<int> offsets_;
  SparseMatrix w_;
};

}  // namespace q3dw
