#pragma once

#include "q3dw/interval_basis.hpp"

namespace q3dw {

// Material coefficient along the interval: a constant (exact integrals) or a
// function of x (dyadic trapezoid quadrature).
class Coefficient {
 public:
  Coefficient(double value = 1.0) : value_(value) {}
  Coefficient(ScalarFunction f) : f_(std::move(f)) {}

  bool is_constant() const { return !f_; }
  double value() const { return value_; }
  double operator()(double x) const { return f_ ? f_(x) : value_; }

 private:
  double value_ = 1.0;
  ScalarFunction f_;
};

// Which endpoints receive the integration-by-parts term -[c phi'_n phi_m].
struct BoundaryTerms {
  bool left = true;
  bool right = true;
};

// M[m][n] = int c phi_n phi_m dx.
SparseMatrix mass_matrix(const IntervalBasis& basis, const Coefficient& coeff, int quad_depth = 12);

// A[m][n] = int c phi_n' phi_m' dx - [c phi_n' phi_m] over the selected ends.
// Needs N >= 3.
SparseMatrix stiffness_matrix(const IntervalBasis& basis, const Coefficient& coeff, BoundaryTerms ends = {},
                              int quad_depth = 12);

// Values and derivatives of all basis functions at the interval ends.
Vector endpoint_values(const IntervalBasis& basis, bool right);
Vector endpoint_derivatives(const IntervalBasis& basis, bool right);

}  // namespace q3dw
