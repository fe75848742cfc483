#include "q3dw/fwt.hpp"

#include "dense_util.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

namespace q3dw {

namespace {

int surrogate_count(int n) { return 8 * n; }

// Coordinates (rows) of the interior wavelets psi_{j,t}, t = 1 .. M-2N, in
// the translate coordinates of scale j-1.
SparseMatrix interior_wavelet_translates(const WaveletFamily& fam, int m) {
  const int n = fam.vanishing_moments();
  const int t0 = -(2 * n - 2);
  const int ntf = 2 * m - t0;
  const auto& g = fam.highpass();
  std::vector<Triplet> trip;
  const int count = std::max(0, m - 2 * n);
  for (int t = 1; t <= m - 2 * n; ++t)
    for (int i = 0; i < static_cast<int>(g.size()); ++i) trip.emplace_back(t - 1, 2 * t + i - t0, g[i]);
  SparseMatrix w(count, ntf);
  w.setFromTriplets(trip.begin(), trip.end());
  return w;
}

SparseMatrix lowpass_matrix(const IntervalBasis& coarse, const IntervalBasis& fine) {
  SparseMatrix h = refinement_matrix(coarse.family(), coarse.size());
  SparseMatrix cc = coarse.coefficients();
  SparseMatrix cf = fine.coefficients();
  SparseMatrix p = cc * h * fine.translate_gram() * SparseMatrix(cf.transpose());
  p.prune(1e-15, 1.0);
  return p;
}

SparseMatrix interior_highpass(const IntervalBasis& coarse, const IntervalBasis& fine) {
  SparseMatrix cf = fine.coefficients();
  SparseMatrix w = interior_wavelet_translates(coarse.family(), coarse.size()) * fine.translate_gram() *
                   SparseMatrix(cf.transpose());
  w.prune(1e-15, 1.0);
  return w;
}

// Edge wavelets for a step with M coarse translates: orthonormal complement of
// V_j and the interior wavelets inside V_{j-1}, localized by position.
Matrix edge_wavelets_dense(const FamilyPtr& fam, int m) {
  const int n = fam->vanishing_moments();
  IntervalBasis coarse(fam, 0, 0.0, double(m));
  IntervalBasis fine(fam, -1, 0.0, double(m));
  Matrix p = Matrix(lowpass_matrix(coarse, fine));
  Matrix wi = Matrix(interior_highpass(coarse, fine));
  Matrix stacked(p.rows() + wi.rows(), p.cols());
  stacked << p, wi;
  const int nf = fine.size();
  Matrix z = detail::null_space(stacked, nf).transpose();
  const int expected = std::min(m, 2 * n);
  if (z.rows() != expected) {
    std::ostringstream msg;
    msg << "wavelet complement has dimension " << z.rows() << ", expected " << expected;
    throw NumericError(msg.str());
  }
  // One re-orthogonalization against the lowpass and interior rows.
  z -= (z * stacked.transpose()) * stacked;
  Eigen::HouseholderQR<Matrix> qr(z.transpose());
  z = (qr.householderQ() * Matrix::Identity(nf, z.rows())).transpose();
  Vector pos(nf);
  for (int i = 0; i < nf; ++i) pos(i) = i;
  detail::localize(z, pos);
  return z;
}

const Matrix& cached_edge_wavelets(const FamilyPtr& fam, int m) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, Matrix> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_tuple(fam->vanishing_moments(), fam->depth(), m);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, edge_wavelets_dense(fam, m)).first;
  return it->second;
}

// Edge coefficients are large on translates whose restriction to the
// interval is tiny, so P and Q inherit roundoff of order 1e-7 for N = 6.
// Rows of [P; Q] that deviate from orthonormality are replaced by
// (S S^T)^{-1/2} S restricted to those rows; the rest are untouched.
void symmetric_orthonormalize(SparseMatrix& p, SparseMatrix& q) {
  const int np = static_cast<int>(p.rows());
  const int nf = static_cast<int>(p.cols());
  SparseMatrix s(np + q.rows(), nf);
  {
    std::vector<Triplet> trip;
    for (const auto* part : {&p, &q}) {
      const int off = part == &p ? 0 : np;
      for (int k = 0; k < part->outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(*part, k); it; ++it) trip.emplace_back(off + it.row(), it.col(), it.value());
    }
    s.setFromTriplets(trip.begin(), trip.end());
  }
  SparseMatrix e = s * SparseMatrix(s.transpose());
  std::vector<int> rows;
  for (int k = 0; k < e.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(e, k); it; ++it)
      if (std::abs(it.value() - (it.row() == it.col() ? 1.0 : 0.0)) > 1e-15) {
        rows.push_back(k);
        break;
      }
  if (rows.empty()) return;

  const int nr = static_cast<int>(rows.size());
  Matrix sub(nr, nf);
  for (int i = 0; i < nr; ++i) sub.row(i) = Matrix(s.row(rows[i]));
  Matrix gram = sub * sub.transpose();
  if ((gram - Matrix::Identity(nr, nr)).cwiseAbs().maxCoeff() > 1e-5)
    throw NumericError("two-scale matrices are far from orthogonal");
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  Matrix t = es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
             es.eigenvectors().transpose();
  Matrix fixed = t * sub;

  std::vector<char> replaced(np + q.rows(), 0);
  for (int r : rows) replaced[r] = 1;
  std::vector<Triplet> tp, tq;
  for (int k = 0; k < s.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(s, k); it; ++it)
      if (!replaced[it.row()]) {
        if (it.row() < np)
          tp.emplace_back(it.row(), it.col(), it.value());
        else
          tq.emplace_back(it.row() - np, it.col(), it.value());
      }
  for (int i = 0; i < nr; ++i)
    for (int c = 0; c < nf; ++c) {
      const double v = fixed(i, c);
      if (std::abs(v) < 1e-17) continue;
      if (rows[i] < np)
        tp.emplace_back(rows[i], c, v);
      else
        tq.emplace_back(rows[i] - np, c, v);
    }
  p.setZero();
  p.setFromTriplets(tp.begin(), tp.end());
  q.setZero();
  q.setFromTriplets(tq.begin(), tq.end());
}

}  // namespace

SparseMatrix refinement_matrix(const WaveletFamily& fam, int m) {
  const int n = fam.vanishing_moments();
  const int t0 = -(2 * n - 2);
  const int nt = m - t0;
  const int ntf = 2 * m - t0;
  const auto& h = fam.lowpass();
  std::vector<Triplet> trip;
  for (int a = 0; a < nt; ++a) {
    const int t = t0 + a;
    for (int i = 0; i < static_cast<int>(h.size()); ++i) {
      const int b = 2 * t + i - t0;
      if (b >= 0 && b < ntf) trip.emplace_back(a, b, h[i]);
    }
  }
  SparseMatrix r(nt, ntf);
  r.setFromTriplets(trip.begin(), trip.end());
  return r;
}

WaveletStep::WaveletStep(BasisPtr coarse, BasisPtr fine) : coarse_(std::move(coarse)), fine_(std::move(fine)) {
  if (!coarse_ || !fine_) throw std::invalid_argument("null basis in wavelet step");
  if (coarse_->scale() != fine_->scale() + 1 || coarse_->left() != fine_->left() ||
      coarse_->right() != fine_->right() ||
      coarse_->family().vanishing_moments() != fine_->family().vanishing_moments())
    throw std::invalid_argument("wavelet step needs bases at adjacent scales on the same interval");

  const int n = coarse_->family().vanishing_moments();
  const int m = coarse_->size();
  const int nf = fine_->size();
  p_ = lowpass_matrix(*coarse_, *fine_);
  SparseMatrix wi = interior_highpass(*coarse_, *fine_);

  const int ms = surrogate_count(n);
  const Matrix& z = cached_edge_wavelets(coarse_->family_ptr(), std::min(m, ms));
  std::vector<Triplet> trip;
  auto add_dense_row = [&](int row, const Matrix& src, int src_row, int shift, bool left) {
    const int half = static_cast<int>(src.cols()) / 2;
    for (int k = 0; k < src.cols(); ++k) {
      double v = src(src_row, k);
      if (v == 0.0) continue;
      if (m > ms && (left ? k >= half : k < half)) {
        if (std::abs(v) > 1e-10 * src.row(src_row).cwiseAbs().maxCoeff()) throw NumericError("edge wavelet is not localized");
        continue;
      }
      trip.emplace_back(row, k + shift, v);
    }
  };
  if (m < 2 * n) {
    for (int r = 0; r < z.rows(); ++r) add_dense_row(r, z, r, 0, true);
  } else {
    for (int r = 0; r < n; ++r) add_dense_row(r, z, r, 0, true);
    for (int k = 0; k < wi.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(wi, k); it; ++it) trip.emplace_back(n + it.row(), it.col(), it.value());
    const int shift = nf - static_cast<int>(z.cols());
    for (int r = 0; r < n; ++r) add_dense_row(m - n + r, z, n + r, shift, false);
  }
  q_.resize(m, nf);
  q_.setFromTriplets(trip.begin(), trip.end());
  symmetric_orthonormalize(p_, q_);
}

std::pair<Vector, Vector> WaveletStep::forward(const Vector& v) const {
  if (v.size() != fine_size()) {
    std::ostringstream msg;
    msg << "fwt_step expects " << fine_size() << " coefficients, got " << v.size();
    throw std::invalid_argument(msg.str());
  }
  return {p_ * v, q_ * v};
}

Vector WaveletStep::inverse(const Vector& s, const Vector& w) const {
  if (s.size() != coarse_size() || w.size() != wavelet_count()) {
    std::ostringstream msg;
    msg << "ifwt_step expects " << coarse_size() << " + " << wavelet_count() << " coefficients, got " << s.size()
        << " + " << w.size();
    throw std::invalid_argument(msg.str());
  }
  return p_.transpose() * s + q_.transpose() * w;
}

double WaveletStep::eval_wavelet(int k, double x) const {
  if (k < 0 || k >= wavelet_count()) throw std::out_of_range("wavelet index out of range");
  Vector row = q_.row(k).transpose();
  return fine_->evaluate(row, x);
}

std::pair<Vector, Vector> fwt_step(const WaveletStep& step, const Vector& v) { return step.forward(v); }

Vector ifwt_step(const WaveletStep& step, const Vector& s, const Vector& w) { return step.inverse(s, w); }

WaveletTransform::WaveletTransform(FamilyPtr family, double length, int jmin, int jmax) : jmin_(jmin), jmax_(jmax) {
  if (jmin > jmax) throw std::invalid_argument("jmin must not exceed jmax");
  for (int j = jmin - 1; j <= jmax; ++j) bases_.push_back(std::make_shared<const IntervalBasis>(family, j, 0.0, length));
  for (int j = jmin; j <= jmax; ++j)
    steps_.push_back(std::make_shared<const WaveletStep>(bases_[j - jmin + 1], bases_[j - jmin]));

  offsets_.push_back(0);
  for (const auto& s : steps_) offsets_.push_back(offsets_.back() + s->wavelet_count());

  // Row blocks: Q_j P_{j-1} ... P_jmin for each level, then the full lowpass chain.
  const int nf = finest().size();
  std::vector<Triplet> trip;
  SparseMatrix chain(nf, nf);
  chain.setIdentity();
  for (std::size_t l = 0; l < steps_.size(); ++l) {
    SparseMatrix rows = steps_[l]->highpass() * chain;
    for (int k = 0; k < rows.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(rows, k); it; ++it)
        trip.emplace_back(offsets_[l] + it.row(), it.col(), it.value());
    chain = SparseMatrix(steps_[l]->lowpass() * chain);
  }
  for (int k = 0; k < chain.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(chain, k); it; ++it)
      trip.emplace_back(offsets_.back() + it.row(), it.col(), it.value());
  w_.resize(nf, nf);
  w_.setFromTriplets(trip.begin(), trip.end());
  w_.prune(1e-16, 1.0);
}

const IntervalBasis& WaveletTransform::basis(int j) const { return *basis_ptr(j); }

BasisPtr WaveletTransform::basis_ptr(int j) const {
  if (j < jmin_ - 1 || j > jmax_) throw std::out_of_range("scale outside transform range");
  return bases_[j - jmin_ + 1];
}

const WaveletStep& WaveletTransform::step(int j) const {
  if (j < jmin_ || j > jmax_) throw std::out_of_range("scale outside transform range");
  return *steps_[j - jmin_];
}

int WaveletTransform::wavelet_offset(int j) const {
  if (j < jmin_ || j > jmax_) throw std::out_of_range("scale outside transform range");
  return offsets_[j - jmin_];
}

Vector WaveletTransform::forward(const Vector& v) const {
  if (v.size() != size()) throw std::invalid_argument("transform input length mismatch");
  return w_ * v;
}

Vector WaveletTransform::inverse(const Vector& c) const {
  if (c.size() != size()) throw std::invalid_argument("transform input length mismatch");
  return w_.transpose() * c;
}

}  // namespace q3dw
