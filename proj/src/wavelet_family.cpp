#include "q3dw/wavelet_family.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <sstream>

namespace q3dw {

namespace {

using cplx = std::complex<double>;

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Multiply polynomial p (highest power first) by (x - z).
std::vector<cplx> mul_linear(const std::vector<cplx>& p, cplx z) {
  std::vector<cplx> out(p.size() + 1, cplx(0.0));
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] += p[i];
    out[i + 1] -= z * p[i];
  }
  return out;
}

// Least-squares solution of the stacked system; throws when the residual is large.
Vector lstsq(const Matrix& a, const Vector& b, double tol, const char* what) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  Vector x = cod.solve(b);
  double res = (a * x - b).cwiseAbs().maxCoeff();
  if (!std::isfinite(res) || res > tol) {
    std::ostringstream msg;
    msg << what << " did not converge: residual " << res;
    throw NumericError(msg.str());
  }
  return x;
}

// lstsq on the system rescaled so that every unknown is O(1): columns by the
// expected magnitudes d, then rows by their largest entry. Tail integrals span
// many orders of magnitude and are only resolved to relative accuracy this way.
Vector scaled_lstsq(const Matrix& a, const Vector& b, const Vector& d, double tol, const char* what) {
  Matrix as = a * d.asDiagonal();
  Vector bs = b;
  for (int r = 0; r < as.rows(); ++r) {
    double norm = as.row(r).cwiseAbs().maxCoeff();
    if (norm > 0.0) {
      as.row(r) /= norm;
      bs(r) /= norm;
    }
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(as);
  Vector x = d.cwiseProduct(cod.solve(bs));
  double res = (a * x - b).cwiseAbs().maxCoeff();
  if (!std::isfinite(res) || res > tol) {
    std::ostringstream msg;
    msg << what << " did not converge: residual " << res;
    throw NumericError(msg.str());
  }
  return x;
}

}  // namespace

std::vector<double> daubechies_lowpass(int n) {
  if (n < 1) throw std::invalid_argument("vanishing-moment count must be >= 1");
  if (n == 1) return {M_SQRT1_2, M_SQRT1_2};

  // Roots of P(y) = sum_k C(N-1+k, k) y^k via its companion matrix.
  const int deg = n - 1;
  Matrix comp = Matrix::Zero(deg, deg);
  const double lead = binomial(2 * n - 2, n - 1);
  for (int i = 0; i < deg; ++i) comp(0, i) = -binomial(n - 2 + deg - i, deg - 1 - i) / lead;
  for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
  Eigen::EigenSolver<Matrix> es(comp);
  if (es.info() != Eigen::Success) throw NumericError("filter root finding failed");

  std::vector<cplx> poly{cplx(1.0)};
  for (int k = 0; k < n; ++k) poly = mul_linear(poly, cplx(-1.0));
  for (int r = 0; r < deg; ++r) {
    cplx y = es.eigenvalues()(r);
    cplx b = 2.0 - 4.0 * y;
    cplx disc = std::sqrt(b * b - 4.0);
    cplx z1 = (b + disc) / 2.0, z2 = (b - disc) / 2.0;
    poly = mul_linear(poly, std::abs(z1) < std::abs(z2) ? z1 : z2);
  }

  std::vector<double> h(poly.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    h[k] = poly[k].real();
    sum += h[k];
  }
  for (double& v : h) v *= M_SQRT2 / sum;

  for (int m = 0; m < n; ++m) {
    double acc = 0.0;
    for (int k = 0; k + 2 * m < 2 * n; ++k) acc += h[k] * h[k + 2 * m];
    if (std::abs(acc - (m == 0 ? 1.0 : 0.0)) > 1e-10) {
      std::ostringstream msg;
      msg << "filter orthogonality residual " << acc << " at shift " << m << " for N=" << n;
      throw NumericError(msg.str());
    }
  }
  return h;
}

WaveletFamily::WaveletFamily(int n, const FamilyOptions& options)
    : n_(n), depth_(options.cascade_depth) {
  if (n < 1) throw std::invalid_argument("vanishing-moment count must be >= 1");
  if (depth_ < 6 || depth_ > 20) throw std::invalid_argument("cascade depth must lie in [6, 20]");
  bool want_deriv = options.derivatives.value_or(n >= 3);
  if (want_deriv && n < 3)
    throw std::invalid_argument("insufficient regularity: derivative samples need N >= 3");
  spacing_ = std::ldexp(1.0, -depth_);
  build_filters();
  build_cascade();
  if (!want_deriv) dphi_.clear();
  build_integrals();
}

void WaveletFamily::build_filters() {
  h_ = daubechies_lowpass(n_);
  const int len = static_cast<int>(h_.size());
  g_.resize(len);
  for (int k = 0; k < len; ++k) g_[k] = (k % 2 == 0 ? 1.0 : -1.0) * h_[len - 1 - k];
}

void WaveletFamily::build_cascade() {
  const int s = support();
  const int len = 2 * n_;

  auto integer_values = [&](int deriv) -> std::vector<double> {
    if (n_ == 1) return {1.0, 0.0};
    Matrix a = Matrix::Zero(s + 2, s + 1);
    Vector b = Vector::Zero(s + 2);
    const double lambda = std::ldexp(1.0, -deriv);
    for (int i = 0; i <= s; ++i) {
      for (int k = 0; k <= s; ++k) {
        int idx = 2 * i - k;
        if (idx >= 0 && idx < len) a(i, k) = M_SQRT2 * h_[idx];
      }
      a(i, i) -= lambda;
    }
    for (int k = 0; k <= s; ++k) a(s + 1, k) = deriv == 0 ? 1.0 : double(k);
    b(s + 1) = deriv == 0 ? 1.0 : -1.0;
    Vector v = lstsq(a, b, 1e-10, deriv == 0 ? "cascade eigenproblem" : "derivative cascade eigenproblem");
    return {v.data(), v.data() + v.size()};
  };

  auto refine = [&](std::vector<double> f, int deriv) {
    const double factor = M_SQRT2 * std::ldexp(1.0, deriv);
    for (int lev = 1; lev <= depth_; ++lev) {
      const long count = static_cast<long>(s) * (1L << lev) + 1;
      const long shift = 1L << (lev - 1);
      std::vector<double> next(count, 0.0);
      for (long i = 0; i < count; ++i) {
        double acc = 0.0;
        for (int k = 0; k < len; ++k) {
          long jj = i - k * shift;
          if (jj >= 0 && jj < static_cast<long>(f.size())) acc += h_[k] * f[jj];
        }
        next[i] = factor * acc;
      }
      f.swap(next);
    }
    for (double v : f)
      if (!std::isfinite(v)) throw NumericError("cascade produced non-finite samples");
    return f;
  };

  phi_int_ = integer_values(0);
  phi_ = refine(phi_int_, 0);

  const long count = static_cast<long>(phi_.size());
  const long unit = 1L << depth_;
  psi_.assign(count, 0.0);
  for (long i = 0; i < count; ++i) {
    double acc = 0.0;
    for (int k = 0; k < len; ++k) {
      long jj = 2 * i - k * unit;
      if (jj >= 0 && jj < count) acc += g_[k] * phi_[jj];
    }
    psi_[i] = M_SQRT2 * acc;
  }

  if (n_ >= 3) {
    dphi_int_ = integer_values(1);
    dphi_ = refine(dphi_int_, 1);
  }
}

void WaveletFamily::build_integrals() {
  const int s = support();
  const int len = 2 * n_;
  const int mspan = 2 * s - 1;
  s_lo_ = 2 - s;
  s_hi_ = 2 * s - 2;

  // Unknown (s, m) pairs: |m| <= S-1 and s strictly inside the overlap
  // (max(0,m), min(S, m+S)) of the two supports.
  std::vector<int> index((s_hi_ - s_lo_ + 1 > 0 ? s_hi_ - s_lo_ + 1 : 0) * mspan, -1);
  std::vector<std::pair<int, int>> unknowns;
  for (int m = -(s - 1); m <= s - 1; ++m)
    for (int sv = std::max(0, m) + 1; sv < std::min(s, m + s); ++sv) {
      index[(sv - s_lo_) * mspan + m + s - 1] = static_cast<int>(unknowns.size());
      unknowns.emplace_back(sv, m);
    }
  const int nu = static_cast<int>(unknowns.size());

  // Returns true and sets value when (sv, m) is determined without solving.
  auto known = [&](int sv, int m, const std::vector<double>& full, double& value) {
    if (std::abs(m) > s - 1) {
      value = 0.0;
      return true;
    }
    if (sv <= std::max(0, m)) {
      value = full[m + s - 1];
      return true;
    }
    if (sv >= std::min(s, m + s)) {
      value = 0.0;
      return true;
    }
    return false;
  };

  auto refinement_rows = [&](double c, const std::vector<double>& full, Matrix& a, Vector& b) {
    for (int r = 0; r < nu; ++r) {
      auto [sv, m] = unknowns[r];
      a(r, r) += 1.0;
      for (int i = 0; i < len; ++i)
        for (int ip = 0; ip < len; ++ip) {
          int s2 = 2 * sv - i, m2 = 2 * m + ip - i;
          double coef = c * h_[i] * h_[ip];
          double kv;
          if (known(s2, m2, full, kv))
            b(r) += coef * kv;
          else
            a(r, index[(s2 - s_lo_) * mspan + m2 + s - 1]) -= coef;
        }
    }
  };

  // int_s^inf |f(y) f(y - m)| dy by trapezoid sums on the cascade grid.
  auto magnitudes = [&](const std::vector<double>& f) {
    const long unit = 1L << depth_;
    Vector d(nu);
    for (int r = 0; r < nu; ++r) {
      auto [sv, m] = unknowns[r];
      const long lo = static_cast<long>(std::max(sv, std::max(0, m))) * unit;
      const long hi = static_cast<long>(std::min(s, m + s)) * unit;
      double acc = 0.0;
      for (long i = lo; i <= hi; ++i) acc += std::abs(f[i] * f[i - m * unit]);
      // Empty windows give exact zeros; the floor keeps the scaling finite.
      d(r) = std::max(acc * spacing_, 1e-30);
    }
    return d;
  };

  std::vector<double> delta(mspan, 0.0);
  delta[s - 1] = 1.0;
  mass_table_.clear();
  if (nu > 0) {
    Matrix a = Matrix::Zero(nu, nu);
    Vector b = Vector::Zero(nu);
    refinement_rows(1.0, delta, a, b);
    Vector x = scaled_lstsq(a, b, magnitudes(phi_), 1e-11, "partial mass integral system");
    mass_table_.assign(index.size(), 0.0);
    for (std::size_t k = 0; k < index.size(); ++k)
      if (index[k] >= 0) mass_table_[k] = x(index[k]);
  }

  if (dphi_.empty()) return;

  // Full-line connection coefficients: eigenvector of 4R, sum m^2 Gamma(m) = -2.
  {
    Matrix a = Matrix::Zero(mspan + 1, mspan);
    Vector b = Vector::Zero(mspan + 1);
    for (int r = 0; r < mspan; ++r) {
      int m = r - (s - 1);
      a(r, r) -= 1.0;
      for (int i = 0; i < len; ++i)
        for (int ip = 0; ip < len; ++ip) {
          int m2 = 2 * m + ip - i;
          if (std::abs(m2) <= s - 1) a(r, m2 + s - 1) += 4.0 * h_[i] * h_[ip];
        }
    }
    for (int r = 0; r < mspan; ++r) {
      int m = r - (s - 1);
      a(mspan, r) = double(m) * m;
    }
    b(mspan) = -2.0;
    Vector x = lstsq(a, b, 1e-10, "connection coefficient system");
    connection_.assign(x.data(), x.data() + x.size());
  }

  // The derivative refinement system alone is singular; append the identities
  // sum_m P(s,m) = 0 and sum_m m P(s,m) = -phi(s) that follow from reproducing 1 and x.
  {
    int smin = s_hi_, smax = s_lo_;
    for (auto [sv, m] : unknowns) {
      smin = std::min(smin, sv);
      smax = std::max(smax, sv);
    }
    const int extra = 2 * (smax - smin + 1);
    Matrix a = Matrix::Zero(nu + extra, nu);
    Vector b = Vector::Zero(nu + extra);
    Matrix top = Matrix::Zero(nu, nu);
    Vector btop = Vector::Zero(nu);
    refinement_rows(4.0, connection_, top, btop);
    a.topRows(nu) = top;
    b.head(nu) = btop;
    int row = nu;
    for (int sv = smin; sv <= smax; ++sv)
      for (int p = 0; p < 2; ++p, ++row) {
        double rhs = p == 0 ? 0.0 : -phi_at_integer(sv);
        for (int m = -(s - 1); m <= s - 1; ++m) {
          double w = p == 0 ? 1.0 : double(m);
          double kv;
          if (known(sv, m, connection_, kv))
            rhs -= w * kv;
          else
            a(row, index[(sv - s_lo_) * mspan + m + s - 1]) += w;
        }
        b(row) = rhs;
      }
    Vector x = scaled_lstsq(a, b, magnitudes(dphi_), 1e-9, "partial stiffness integral system");
    stiff_table_.assign(index.size(), 0.0);
    for (std::size_t k = 0; k < index.size(); ++k)
      if (index[k] >= 0) stiff_table_[k] = x(index[k]);
  }
}

double WaveletFamily::interpolate(const std::vector<double>& table, double y) const {
  const double pos = y / spacing_;
  if (!(pos >= 0.0)) return 0.0;
  const double last = static_cast<double>(table.size() - 1);
  if (pos >= last) return pos == last ? table.back() : 0.0;
  const long i = static_cast<long>(pos);
  const double frac = pos - double(i);
  return table[i] + frac * (table[i + 1] - table[i]);
}

double WaveletFamily::dphi(double y) const {
  if (dphi_.empty()) throw std::logic_error("derivative samples not available for this family");
  return interpolate(dphi_, y);
}

double WaveletFamily::phi_at_integer(int k) const {
  if (k < 0 || k > support()) return 0.0;
  return phi_int_[k];
}

double WaveletFamily::dphi_at_integer(int k) const {
  if (dphi_int_.empty()) throw std::logic_error("derivative samples not available for this family");
  if (k < 0 || k > support()) return 0.0;
  return dphi_int_[k];
}

double WaveletFamily::partial_mass(int sv, int m) const {
  const int s = support();
  if (std::abs(m) > s - 1) return 0.0;
  if (sv <= std::max(0, m)) return m == 0 ? 1.0 : 0.0;
  if (sv >= std::min(s, m + s)) return 0.0;
  return mass_table_[(sv - s_lo_) * (2 * s - 1) + m + s - 1];
}

double WaveletFamily::partial_stiffness(int sv, int m) const {
  if (dphi_.empty()) throw std::logic_error("stiffness integrals need N >= 3");
  const int s = support();
  if (std::abs(m) > s - 1) return 0.0;
  if (sv <= std::max(0, m)) return connection_[m + s - 1];
  if (sv >= std::min(s, m + s)) return 0.0;
  return stiff_table_[(sv - s_lo_) * (2 * s - 1) + m + s - 1];
}

double WaveletFamily::connection(int m) const {
  if (dphi_.empty()) throw std::logic_error("stiffness integrals need N >= 3");
  const int s = support();
  if (std::abs(m) > s - 1) return 0.0;
  return connection_[m + s - 1];
}

FamilyPtr make_family(int n, const FamilyOptions& options) {
  return std::make_shared<const WaveletFamily>(n, options);
}

FamilyPtr make_family(int n, int cascade_depth) {
  FamilyOptions options;
  options.cascade_depth = cascade_depth;
  return make_family(n, options);
}

}  // namespace q3dw
