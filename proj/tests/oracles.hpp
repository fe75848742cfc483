#pragma once

// Independent reference computations shared by unit and acceptance tests.
// Everything here works from raw cascade samples with the trapezoid rule on
// the exact dyadic grid, never from the library's integral tables.

#include "q3dw/fwt.hpp"

#include <cmath>
#include <functional>

namespace q3dw::oracle {

// Trapezoid sum over translate pairs of int_0^m f(y - t) f(y - t') dy, with
// samples taken every 2^-qd (qd <= cascade depth, so no interpolation).
inline Matrix translate_products(const WaveletFamily& fam, int m, int qd, const std::vector<double>& f) {
  const int n = fam.vanishing_moments();
  const int s = fam.support();
  const int t0 = -(2 * n - 2);
  const int nt = m - t0;
  const long per = 1L << qd;
  const long stride = 1L << (fam.depth() - qd);
  Matrix g = Matrix::Zero(nt, nt);
  for (int t = t0; t < m; ++t)
    for (int tp = t; tp < std::min(m, t + s); ++tp) {
      const long lo = static_cast<long>(std::max(0, tp)) * per;
      const long hi = static_cast<long>(std::min(m, t + s)) * per;
      double acc = 0.0;
      for (long i = lo; i <= hi; ++i) {
        const double v = f[(i - t * per) * stride] * f[(i - tp * per) * stride];
        acc += (i == lo || i == hi) ? 0.5 * v : v;
      }
      g(t - t0, tp - t0) = g(tp - t0, t - t0) = acc / double(per);
    }
  return g;
}

inline Matrix quadrature_gram(const IntervalBasis& basis, int qd = 14) {
  Matrix c(basis.coefficients());
  return c * translate_products(basis.family(), basis.size(), qd, basis.family().phi_samples()) * c.transpose();
}

// int_a^b p(x) phi_hat_n(x) dx for every basis function.
inline Vector quadrature_moments(const IntervalBasis& basis, const std::function<double(double)>& p, int qd = 14) {
  const auto& fam = basis.family();
  const auto& phi = fam.phi_samples();
  const int m = basis.size();
  const int s = fam.support();
  const int t0 = basis.first_translate();
  const long per = 1L << qd;
  const long stride = 1L << (fam.depth() - qd);
  const double h = basis.unit() / double(per);
  Vector tm(basis.translate_count());
  for (int t = t0; t < m; ++t) {
    const long lo = static_cast<long>(std::max(0, t)) * per;
    const long hi = static_cast<long>(std::min(m, t + s)) * per;
    double acc = 0.0;
    for (long i = lo; i <= hi; ++i) {
      const double v = p(basis.left() + h * double(i)) * phi[(i - t * per) * stride];
      acc += (i == lo || i == hi) ? 0.5 * v : v;
    }
    tm(t - t0) = acc * h / std::sqrt(basis.unit());
  }
  return Matrix(basis.coefficients()) * tm;
}

// Coefficients of the constant function 1 from the exact partition of unity
// sum_t phi(y - t) = 1: translate coordinates 2^{j/2}, mapped through the Gram.
inline Vector constant_coefficients(const IntervalBasis& basis) {
  Vector tau = Vector::Constant(basis.translate_count(), std::sqrt(basis.unit()));
  return Matrix(basis.coefficients()) * (Matrix(basis.translate_gram()) * tau);
}

}  // namespace q3dw::oracle
