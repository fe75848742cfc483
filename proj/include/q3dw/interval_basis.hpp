#pragma once

#include "q3dw/wavelet_family.hpp"

#include <span>

namespace q3dw {

// Orthonormal scaling-function basis of V_j on [a, b].
//
// Each function is a finite combination of translates phi_{j,t}, t in
// [-(2N-2), M-1] with M = (b-a) 2^-j, restricted to [a, b]. The span is the
// set of translate expansions whose coefficients are polynomial of degree < N
// on each edge range, which reproduces polynomials up to degree N-1 and is
// nested across scales. Functions are ordered by position: N left-edge
// functions, the interior translates t = 1 .. M-2N, N right-edge functions.
// For N <= M < 2N there are no interior functions.
class IntervalBasis {
 public:
  using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  IntervalBasis(FamilyPtr family, int scale, double a, double b);

  const WaveletFamily& family() const { return *family_; }
  const FamilyPtr& family_ptr() const { return family_; }
  int scale() const { return scale_; }
  double left() const { return a_; }
  double right() const { return b_; }
  double length() const { return b_ - a_; }
  // anz
  int size() const { return m_; }
  int inner_size() const { return inner_; }
  int edge_size() const { return m_ - inner_; }
  int first_translate() const { return t0_; }
  int translate_count() const { return m_ - t0_; }

  // anz x translate_count; row n holds the translate coefficients of function n.
  const RowSparse& coefficients() const { return coeffs_; }
  // Gram matrix of the translates restricted to [a, b] (exact, banded).
  const SparseMatrix& translate_gram() const { return gram_; }

  double eval(int n, double x) const;
  double eval_derivative(int n, double x) const;
  Vector values_at(double x) const;
  Vector derivatives_at(double x) const;

  // sum_n u_n phi_n(x)
  double evaluate(const Vector& u, double x) const;
  Vector evaluate(const Vector& u, std::span<const double> xs) const;
  // Rows: points, columns: basis functions.
  SparseMatrix evaluation_matrix(std::span<const double> xs) const;

  // <f, phi_{j,t}> on [a, b] for every translate, composite trapezoid rule on
  // the dyadic grid of spacing 2^(j - quad_depth).
  Vector translate_moments(const ScalarFunction& f, int quad_depth = 12) const;
  Vector project(const ScalarFunction& f, int quad_depth = 12) const;

  // Points of the quadrature grid used by translate_moments.
  std::vector<double> quadrature_grid(int quad_depth) const;
  // anz x grid size; project(f) == projection_matrix(d) * f(quadrature_grid(d)).
  SparseMatrix projection_matrix(int quad_depth = 12) const;

  double unit() const { return unit_; }  // 2^j

 private:
  double translate_value(int t, double y) const;
  double translate_derivative(int t, double y) const;

  FamilyPtr family_;
  int scale_;
  double a_, b_;
  double unit_;
  int m_, inner_, t0_;
  RowSparse coeffs_;
  SparseMatrix gram_;
};

IntervalBasis make_interval_basis(FamilyPtr family, int scale, double a, double b);

// M = (b-a) 2^-j when it is an integer, otherwise throws.
int dyadic_count(double length, int scale);

// Dense translate-coefficient table of the basis with M translates-per-length
// on [0, M]; exposed for tests and for the wavelet step construction.
Matrix interval_coefficients_dense(const WaveletFamily& family, int m);

// Exact Gram matrix of translates t0 .. M-1 restricted to [0, M].
SparseMatrix translate_gram(const WaveletFamily& family, int m);

}  // namespace q3dw
