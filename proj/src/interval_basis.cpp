#include "q3dw/interval_basis.hpp"

#include "dense_util.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

namespace q3dw {

using detail::null_space;

namespace {

// Intervals with at least this many translates get independent edge blocks.
int separation_count(int n) { return 6 * n; }

// Orthonormalize rows of e with respect to the inner product g; two passes
// recover the accuracy lost to the ill-conditioned edge Gram block.
void orthonormalize(Matrix& e, const Matrix& g) {
  for (int pass = 0; pass < 2; ++pass) {
    Matrix s = e * g * e.transpose();
    s = 0.5 * (s + s.transpose());
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw NumericError("edge-function Gram matrix is not positive definite");
    e = llt.matrixL().solve(e);
  }
}

// Rows of the constraint matrix forcing coefficients on [first, last] to be
// orthogonal to the polynomials of degree < n. Columns are offset by origin.
void polynomial_rows(int n, int first, int last, int origin, int cols, std::vector<Vector>& rows) {
  const int cnt = last - first + 1;
  Matrix v(cnt, n);
  const double mid = 0.5 * (first + last);
  for (int i = 0; i < cnt; ++i)
    for (int p = 0; p < n; ++p) v(i, p) = std::pow((first + i - mid) / cnt, p);
  Eigen::HouseholderQR<Matrix> qr(v);
  Matrix q = qr.householderQ() * Matrix::Identity(cnt, cnt);
  for (int c = n; c < cnt; ++c) {
    Vector r = Vector::Zero(cols);
    r.segment(first - origin, cnt) = q.col(c);
    rows.push_back(r);
  }
}

// Edge functions over the translate window [lo, hi]: null space of the
// constraint rows, orthogonalized against the listed interior translates,
// G-orthonormalized and localized.
Matrix edge_functions(int lo, int hi, const Matrix& g, std::vector<Vector> rows, const std::vector<int>& interior,
                      int expected) {
  const int nt = hi - lo + 1;
  Matrix a(rows.size(), nt);
  for (std::size_t i = 0; i < rows.size(); ++i) a.row(i) = rows[i].transpose();
  Matrix e = null_space(a, nt).transpose();
  if (e.rows() != expected) {
    std::ostringstream msg;
    msg << "edge space has dimension " << e.rows() << ", expected " << expected;
    throw NumericError(msg.str());
  }
  Matrix eg = e * g;
  for (int c : interior) e.col(c) -= eg.col(c);
  orthonormalize(e, g);
  // Position operator weighted by the function energy, not by raw
  // coefficients, so the far translates with tiny restrictions do not dominate.
  Matrix d = Vector::LinSpaced(nt, lo, hi).asDiagonal() * g;
  Matrix x = e * (0.5 * (d + d.transpose())) * e.transpose();
  x = 0.5 * (x + x.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(x);
  e = es.eigenvectors().transpose() * e;
  detail::fix_signs(e);
  return e;
}

// Both edges at once; needed when the edge functions may overlap.
Matrix joint_construction(const WaveletFamily& fam, int m) {
  const int n = fam.vanishing_moments();
  const int t0 = -(2 * n - 2);
  const int nt = m - t0;
  Matrix g = Matrix(translate_gram(fam, m));
  std::vector<Vector> rows;
  polynomial_rows(n, t0, 0, t0, nt, rows);
  polynomial_rows(n, m - 2 * n + 1, m - 1, t0, nt, rows);
  std::vector<int> interior;
  for (int t = 1; t <= m - 2 * n; ++t) {
    interior.push_back(t - t0);
    Vector r = Vector::Zero(nt);
    r(t - t0) = 1.0;
    rows.push_back(r);
  }
  Matrix e = edge_functions(t0, m - 1, g, rows, interior, std::min(m, 2 * n));
  if (m < 2 * n) return e;
  Matrix c = Matrix::Zero(m, nt);
  c.topRows(n) = e.topRows(n);
  for (std::size_t i = 0; i < interior.size(); ++i) c(n + i, interior[i]) = 1.0;
  c.bottomRows(n) = e.bottomRows(n);
  return c;
}

// Left edge functions on the half line [0, inf), translates t0 .. 2N-2.
Matrix left_block(const WaveletFamily& fam) {
  const int n = fam.vanishing_moments();
  const int t0 = -(2 * n - 2);
  const int hi = 2 * n - 2;
  const int nt = hi - t0 + 1;
  const int s = fam.support();
  Matrix g = Matrix::Zero(nt, nt);
  for (int a = 0; a < nt; ++a)
    for (int b = 0; b < nt; ++b)
      if (b >= a && b - a < s) g(a, b) = g(b, a) = fam.partial_mass(-(t0 + a), b - a);
  std::vector<Vector> rows;
  polynomial_rows(n, t0, 0, t0, nt, rows);
  std::vector<int> interior;
  for (int t = 1; t <= hi; ++t) {
    interior.push_back(t - t0);
    Vector r = Vector::Zero(nt);
    r(t - t0) = 1.0;
    rows.push_back(r);
  }
  return edge_functions(t0, hi, g, rows, interior, n);
}

// Right edge functions on (-inf, 0], translates -(4N-3) .. -1 relative to M.
Matrix right_block(const WaveletFamily& fam) {
  const int n = fam.vanishing_moments();
  const int lo = -(4 * n - 3);
  const int hi = -1;
  const int nt = hi - lo + 1;
  const int s = fam.support();
  Matrix g = Matrix::Zero(nt, nt);
  for (int a = 0; a < nt; ++a)
    for (int b = 0; b < nt; ++b)
      if (b >= a && b - a < s) g(a, b) = g(b, a) = (a == b ? 1.0 : 0.0) - fam.partial_mass(-(lo + a), b - a);
  std::vector<Vector> rows;
  polynomial_rows(n, -(2 * n - 1), -1, lo, nt, rows);
  std::vector<int> interior;
  for (int t = lo; t <= -2 * n; ++t) {
    interior.push_back(t - lo);
    Vector r = Vector::Zero(nt);
    r(t - lo) = 1.0;
    rows.push_back(r);
  }
  return edge_functions(lo, hi, g, rows, interior, n);
}

template <class F>
const Matrix& cached(const WaveletFamily& fam, int key_m, F build) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, Matrix> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_tuple(fam.vanishing_moments(), fam.depth(), key_m);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, build()).first;
  return it->second;
}

IntervalBasis::RowSparse build_coefficients(const WaveletFamily& fam, int m) {
  const int n = fam.vanishing_moments();
  const int t0 = -(2 * n - 2);
  const int nt = m - t0;
  std::vector<Triplet> trip;
  auto add = [&](int row, int col, double v) {
    if (v != 0.0) trip.emplace_back(row, col, v);
  };
  if (m < separation_count(n)) {
    const Matrix& c = cached(fam, m, [&] { return joint_construction(fam, m); });
    for (int r = 0; r < c.rows(); ++r)
      for (int k = 0; k < nt; ++k) add(r, k, c(r, k));
  } else {
    // Keys -1 and -2 hold the half-line blocks.
    const Matrix& left = cached(fam, -1, [&] { return left_block(fam); });
    const Matrix& right = cached(fam, -2, [&] { return right_block(fam); });
    for (int r = 0; r < n; ++r)
      for (int k = 0; k < left.cols(); ++k) add(r, k, left(r, k));
    for (int t = 1; t <= m - 2 * n; ++t) add(n + t - 1, t - t0, 1.0);
    const int shift = m - (4 * n - 3) - t0;
    for (int r = 0; r < n; ++r)
      for (int k = 0; k < right.cols(); ++k) add(m - n + r, k + shift, right(r, k));
  }
  IntervalBasis::RowSparse out(m, nt);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

}  // namespace

int dyadic_count(double length, int scale) {
  if (!(length > 0.0)) throw std::invalid_argument("interval length must be positive");
  const double m = std::ldexp(length, -scale);
  const double r = std::round(m);
  if (std::abs(m - r) > 1e-9 * std::max(1.0, m) || r < 1.0) {
    std::ostringstream msg;
    msg << "interval length " << length << " is not an integer multiple of 2^" << scale;
    throw std::invalid_argument(msg.str());
  }
  return static_cast<int>(r);
}

SparseMatrix translate_gram(const WaveletFamily& fam, int m) {
  const int n = fam.vanishing_moments();
  const int s = fam.support();
  const int t0 = -(2 * n - 2);
  const int nt = m - t0;
  std::vector<Triplet> trip;
  for (int a = 0; a < nt; ++a) {
    const int t = t0 + a;
    for (int d = 0; d <= s - 1; ++d) {
      const int b = a + d;
      if (b >= nt) continue;
      double v = fam.partial_mass(-t, d) - fam.partial_mass(m - t, d);
      if (v == 0.0) continue;
      trip.emplace_back(a, b, v);
      if (d != 0) trip.emplace_back(b, a, v);
    }
  }
  SparseMatrix g(nt, nt);
  g.setFromTriplets(trip.begin(), trip.end());
  return g;
}

Matrix interval_coefficients_dense(const WaveletFamily& fam, int m) {
  return Matrix(build_coefficients(fam, m));
}

IntervalBasis::IntervalBasis(FamilyPtr family, int scale, double a, double b)
    : family_(std::move(family)), scale_(scale), a_(a), b_(b) {
  if (!family_) throw std::invalid_argument("null wavelet family");
  if (!(b > a)) throw std::invalid_argument("interval must satisfy a < b");
  m_ = dyadic_count(b - a, scale);
  const int n = family_->vanishing_moments();
  if (m_ < n) {
    std::ostringstream msg;
    msg << "scale too coarse for interval: " << m_ << " translates fit, at least " << n << " needed";
    throw std::invalid_argument(msg.str());
  }
  unit_ = std::ldexp(1.0, scale);
  inner_ = std::max(0, m_ - 2 * n);
  t0_ = -(2 * n - 2);
  coeffs_ = build_coefficients(*family_, m_);
  gram_ = q3dw::translate_gram(*family_, m_);
}

double IntervalBasis::translate_value(int t, double y) const { return family_->phi(y - t); }

double IntervalBasis::translate_derivative(int t, double y) const { return family_->dphi(y - t); }

namespace {

double snap(double y) {
  const double r = std::round(y);
  return std::abs(y - r) < 1e-11 * std::max(1.0, std::abs(r)) ? r : y;
}

}  // namespace

double IntervalBasis::eval(int n, double x) const {
  if (n < 0 || n >= m_) throw std::out_of_range("basis index out of range");
  if (x < a_ || x > b_) return 0.0;
  const double y = snap((x - a_) / unit_);
  double acc = 0.0;
  for (RowSparse::InnerIterator it(coeffs_, n); it; ++it) acc += it.value() * translate_value(t0_ + it.col(), y);
  return acc / std::sqrt(unit_);
}

double IntervalBasis::eval_derivative(int n, double x) const {
  if (n < 0 || n >= m_) throw std::out_of_range("basis index out of range");
  if (x < a_ || x > b_) return 0.0;
  const double y = snap((x - a_) / unit_);
  double acc = 0.0;
  for (RowSparse::InnerIterator it(coeffs_, n); it; ++it)
    acc += it.value() * translate_derivative(t0_ + it.col(), y);
  return acc / (std::sqrt(unit_) * unit_);
}

Vector IntervalBasis::values_at(double x) const {
  Vector tv = Vector::Zero(translate_count());
  if (x >= a_ && x <= b_) {
    const double y = snap((x - a_) / unit_);
    const int hi = std::min(m_ - 1, static_cast<int>(std::floor(y)));
    const int lo = std::max(t0_, static_cast<int>(std::ceil(y)) - family_->support());
    for (int t = lo; t <= hi; ++t) tv(t - t0_) = translate_value(t, y);
  }
  return (coeffs_ * tv) / std::sqrt(unit_);
}

Vector IntervalBasis::derivatives_at(double x) const {
  Vector tv = Vector::Zero(translate_count());
  if (x >= a_ && x <= b_) {
    const double y = snap((x - a_) / unit_);
    const int hi = std::min(m_ - 1, static_cast<int>(std::floor(y)));
    const int lo = std::max(t0_, static_cast<int>(std::ceil(y)) - family_->support());
    for (int t = lo; t <= hi; ++t) tv(t - t0_) = translate_derivative(t, y);
  }
  return (coeffs_ * tv) / (std::sqrt(unit_) * unit_);
}

double IntervalBasis::evaluate(const Vector& u, double x) const {
  if (u.size() != m_) throw std::invalid_argument("coefficient vector length does not match basis size");
  return values_at(x).dot(u);
}

Vector IntervalBasis::evaluate(const Vector& u, std::span<const double> xs) const {
  if (u.size() != m_) throw std::invalid_argument("coefficient vector length does not match basis size");
  Vector c = coeffs_.transpose() * u;
  Vector out(xs.size());
  const double amp = 1.0 / std::sqrt(unit_);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    double acc = 0.0;
    if (x >= a_ && x <= b_) {
      const double y = snap((x - a_) / unit_);
      const int hi = std::min(m_ - 1, static_cast<int>(std::floor(y)));
      const int lo = std::max(t0_, static_cast<int>(std::ceil(y)) - family_->support());
      for (int t = lo; t <= hi; ++t) acc += c(t - t0_) * translate_value(t, y);
    }
    out(i) = amp * acc;
  }
  return out;
}

SparseMatrix IntervalBasis::evaluation_matrix(std::span<const double> xs) const {
  std::vector<Triplet> trip;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Vector v = values_at(xs[i]);
    for (int n = 0; n < m_; ++n)
      if (v(n) != 0.0) trip.emplace_back(static_cast<int>(i), n, v(n));
  }
  SparseMatrix e(static_cast<Eigen::Index>(xs.size()), m_);
  e.setFromTriplets(trip.begin(), trip.end());
  return e;
}

std::vector<double> IntervalBasis::quadrature_grid(int quad_depth) const {
  const long per = 1L << quad_depth;
  const long count = static_cast<long>(m_) * per + 1;
  std::vector<double> xs(count);
  const double h = unit_ / double(per);
  for (long i = 0; i < count; ++i) xs[i] = a_ + h * double(i);
  xs.back() = b_;
  return xs;
}

Vector IntervalBasis::translate_moments(const ScalarFunction& f, int quad_depth) const {
  if (quad_depth < 1 || quad_depth > family_->depth())
    throw std::invalid_argument("quadrature depth must lie in [1, cascade depth]");
  const long per = 1L << quad_depth;
  const long stride = 1L << (family_->depth() - quad_depth);
  const std::vector<double> xs = quadrature_grid(quad_depth);
  std::vector<double> fv(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fv[i] = f(xs[i]);
    if (!std::isfinite(fv[i])) throw NumericError("non-finite function samples in projection");
  }
  const auto& phi = family_->phi_samples();
  const int s = family_->support();
  const double w = std::sqrt(unit_) / double(per);
  Vector out(translate_count());
  for (int t = t0_; t < m_; ++t) {
    const long lo = std::max(0, t) * per;
    const long hi = std::min(m_, t + s) * per;
    double acc = 0.0;
    for (long i = lo; i <= hi; ++i) {
      double v = fv[i] * phi[(i - static_cast<long>(t) * per) * stride];
      acc += (i == lo || i == hi) ? 0.5 * v : v;
    }
    out(t - t0_) = w * acc;
  }
  return out;
}

SparseMatrix IntervalBasis::projection_matrix(int quad_depth) const {
  if (quad_depth < 1 || quad_depth > family_->depth())
    throw std::invalid_argument("quadrature depth must lie in [1, cascade depth]");
  const long per = 1L << quad_depth;
  const long stride = 1L << (family_->depth() - quad_depth);
  const long count = static_cast<long>(m_) * per + 1;
  const auto& phi = family_->phi_samples();
  const int s = family_->support();
  const double w = std::sqrt(unit_) / double(per);
  std::vector<Triplet> trip;
  for (int t = t0_; t < m_; ++t) {
    const long lo = std::max(0, t) * per;
    const long hi = std::min(m_, t + s) * per;
    for (long i = lo; i <= hi; ++i) {
      double v = w * phi[(i - static_cast<long>(t) * per) * stride];
      if (i == lo || i == hi) v *= 0.5;
      if (v != 0.0) trip.emplace_back(t - t0_, static_cast<int>(i), v);
    }
  }
  SparseMatrix moments(translate_count(), static_cast<int>(count));
  moments.setFromTriplets(trip.begin(), trip.end());
  return SparseMatrix(coeffs_ * moments);
}

Vector IntervalBasis::project(const ScalarFunction& f, int quad_depth) const {
  return coeffs_ * translate_moments(f, quad_depth);
}

IntervalBasis make_interval_basis(FamilyPtr family, int scale, double a, double b) {
  return IntervalBasis(std::move(family), scale, a, b);
}

}  // namespace q3dw
