#include "q3dw/galerkin.hpp"

#include <cmath>
#include <sstream>

namespace q3dw {

namespace {

SparseMatrix sandwich(const IntervalBasis& basis, const std::vector<Triplet>& trip) {
  const int nt = basis.translate_count();
  SparseMatrix t(nt, nt);
  t.setFromTriplets(trip.begin(), trip.end());
  SparseMatrix c = basis.coefficients();
  SparseMatrix out = c * t * SparseMatrix(c.transpose());
  out.prune(1e-300, 1.0);
  return out;
}

std::vector<double> coefficient_samples(const IntervalBasis& basis, const Coefficient& coeff, int quad_depth) {
  const std::vector<double> xs = basis.quadrature_grid(quad_depth);
  std::vector<double> cv(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    cv[i] = coeff(xs[i]);
    if (!std::isfinite(cv[i])) {
      std::ostringstream msg;
      msg << "non-finite coefficient sample at x = " << xs[i];
      throw NumericError(msg.str());
    }
  }
  return cv;
}

// sum_i w_i c(x_i) f(y_i - t) f(y_i - t') on the dyadic grid, per translate pair.
std::vector<Triplet> quadrature_translate_matrix(const IntervalBasis& basis, const std::vector<double>& cv,
                                                 const std::vector<double>& samples, int quad_depth, double scale) {
  const auto& fam = basis.family();
  const int s = fam.support();
  const int m = basis.size();
  const int t0 = basis.first_translate();
  const long per = 1L << quad_depth;
  const long stride = 1L << (fam.depth() - quad_depth);
  std::vector<Triplet> trip;
  for (int t = t0; t < m; ++t)
    for (int tp = t; tp < std::min(m, t + s); ++tp) {
      const long lo = static_cast<long>(std::max(0, tp)) * per;
      const long hi = static_cast<long>(std::min(m, t + s)) * per;
      if (hi <= lo) continue;
      double acc = 0.0;
      for (long i = lo; i <= hi; ++i) {
        double v = cv[i] * samples[(i - t * per) * stride] * samples[(i - tp * per) * stride];
        acc += (i == lo || i == hi) ? 0.5 * v : v;
      }
      acc *= scale / double(per);
      trip.emplace_back(t - t0, tp - t0, acc);
      if (tp != t) trip.emplace_back(tp - t0, t - t0, acc);
    }
  return trip;
}

void check_depth(const IntervalBasis& basis, int quad_depth) {
  if (quad_depth < 1 || quad_depth > basis.family().depth())
    throw std::invalid_argument("quadrature depth must lie in [1, cascade depth]");
}

}  // namespace

Vector endpoint_values(const IntervalBasis& basis, bool right) {
  return basis.values_at(right ? basis.right() : basis.left());
}

Vector endpoint_derivatives(const IntervalBasis& basis, bool right) {
  return basis.derivatives_at(right ? basis.right() : basis.left());
}

SparseMatrix mass_matrix(const IntervalBasis& basis, const Coefficient& coeff, int quad_depth) {
  if (coeff.is_constant()) {
    if (!std::isfinite(coeff.value())) throw NumericError("non-finite mass coefficient");
    SparseMatrix c = basis.coefficients();
    SparseMatrix out = coeff.value() * (c * basis.translate_gram() * SparseMatrix(c.transpose()));
    out.prune(1e-300, 1.0);
    return out;
  }
  check_depth(basis, quad_depth);
  auto cv = coefficient_samples(basis, coeff, quad_depth);
  return sandwich(basis, quadrature_translate_matrix(basis, cv, basis.family().phi_samples(), quad_depth, 1.0));
}

SparseMatrix stiffness_matrix(const IntervalBasis& basis, const Coefficient& coeff, BoundaryTerms ends,
                              int quad_depth) {
  const auto& fam = basis.family();
  if (!fam.has_derivative())
    throw std::invalid_argument("insufficient regularity: stiffness matrices need N >= 3");
  const int s = fam.support();
  const int m = basis.size();
  const int t0 = basis.first_translate();
  const double inv_unit2 = 1.0 / (basis.unit() * basis.unit());

  SparseMatrix a;
  if (coeff.is_constant()) {
    if (!std::isfinite(coeff.value())) throw NumericError("non-finite stiffness coefficient");
    std::vector<Triplet> trip;
    for (int t = t0; t < m; ++t)
      for (int tp = t; tp < std::min(m, t + s); ++tp) {
        const int d = tp - t;
        double v = coeff.value() * inv_unit2 * (fam.partial_stiffness(-t, d) - fam.partial_stiffness(m - t, d));
        trip.emplace_back(t - t0, tp - t0, v);
        if (tp != t) trip.emplace_back(tp - t0, t - t0, v);
      }
    a = sandwich(basis, trip);
  } else {
    check_depth(basis, quad_depth);
    auto cv = coefficient_samples(basis, coeff, quad_depth);
    a = sandwich(basis, quadrature_translate_matrix(basis, cv, fam.dphi_samples(), quad_depth, inv_unit2));
  }

  // -[c phi_n' phi_m]_a^b, row m (test), column n (trial).
  std::vector<Triplet> trip;
  auto add_end = [&](bool right, double sign) {
    const double c = coeff(right ? basis.right() : basis.left());
    const Vector v = endpoint_values(basis, right);
    const Vector d = endpoint_derivatives(basis, right);
    for (int row = 0; row < m; ++row) {
      if (v(row) == 0.0) continue;
      for (int col = 0; col < m; ++col)
        if (d(col) != 0.0) trip.emplace_back(row, col, sign * c * d(col) * v(row));
    }
  };
  if (ends.right) add_end(true, -1.0);
  if (ends.left) add_end(false, 1.0);
  if (!trip.empty()) {
    SparseMatrix bt(m, m);
    bt.setFromTriplets(trip.begin(), trip.end());
    a += bt;
  }
  return a;
}

}  // namespace q3dw
