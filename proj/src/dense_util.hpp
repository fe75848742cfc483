#pragma once

#include "q3dw/types.hpp"

#include <Eigen/Eigenvalues>

namespace q3dw::detail {

// Orthonormal basis (columns) of the null space of the rows of a.
inline Matrix null_space(const Matrix& a, int cols) {
  if (a.rows() == 0) return Matrix::Identity(cols, cols);
  Eigen::ColPivHouseholderQR<Matrix> qr(a.transpose());
  const int rank = static_cast<int>(qr.rank());
  Matrix q = qr.householderQ() * Matrix::Identity(cols, cols);
  return q.rightCols(cols - rank);
}

// Make the largest-magnitude entry of each row positive.
inline void fix_signs(Matrix& e) {
  for (int r = 0; r < e.rows(); ++r) {
    Eigen::Index c;
    e.row(r).cwiseAbs().maxCoeff(&c);
    if (e(r, c) < 0) e.row(r) *= -1.0;
  }
}

// Rotate the orthonormal rows of e onto eigenvectors of the position
// operator e diag(pos) e^T, ascending, so each row is localized.
inline void localize(Matrix& e, const Vector& pos) {
  Matrix x = e * pos.asDiagonal() * e.transpose();
  x = 0.5 * (x + x.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(x);
  e = es.eigenvectors().transpose() * e;
  fix_signs(e);
}

inline SparseMatrix to_sparse(const Matrix& m, double drop = 0.0) {
  std::vector<Triplet> trip;
  for (int c = 0; c < m.cols(); ++c)
    for (int r = 0; r < m.rows(); ++r)
      if (std::abs(m(r, c)) > drop) trip.emplace_back(r, c, m(r, c));
  SparseMatrix s(m.rows(), m.cols());
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

}  // namespace q3dw::detail
