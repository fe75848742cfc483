#include "q3dw/saddle.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace q3dw {

SparseMatrix saddle_matrix(const SparseMatrix& k, const SparseMatrix& c) {
  const int n = static_cast<int>(k.rows());
  const int nc = static_cast<int>(c.rows());
  std::vector<Triplet> trip;
  trip.reserve(k.nonZeros() + 2 * c.nonZeros());
  for (int j = 0; j < k.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(k, j); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  for (int j = 0; j < c.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(c, j); it; ++it) {
      trip.emplace_back(n + it.row(), it.col(), it.value());
      trip.emplace_back(it.col(), n + it.row(), it.value());
    }
  SparseMatrix s(n + nc, n + nc);
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

double condition_estimate(const SparseMatrix& k, Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>& lu) {
  const int n = static_cast<int>(k.rows());
  double norm_k = 0.0;
  for (int j = 0; j < k.outerSize(); ++j) {
    double col = 0.0;
    for (SparseMatrix::InnerIterator it(k, j); it; ++it) col += std::abs(it.value());
    norm_k = std::max(norm_k, col);
  }
  // Hager / Higham iteration for ||K^-1||_1 using solves with K and K^T.
  Vector x = Vector::Constant(n, 1.0 / n);
  double est = 0.0;
  for (int iter = 0; iter < 5; ++iter) {
    Vector y = lu.solve(x);
    double norm_y = y.lpNorm<1>();
    if (!std::isfinite(norm_y)) return std::numeric_limits<double>::infinity();
    if (iter > 0 && norm_y <= est) break;
    est = norm_y;
    Vector xi = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
    Vector z = lu.transpose().solve(xi);
    Eigen::Index jmax;
    if (z.cwiseAbs().maxCoeff(&jmax) <= z.dot(x)) break;
    x.setZero();
    x(jmax) = 1.0;
  }
  return norm_k * est;
}

SaddlePointSolver::SaddlePointSolver(const SparseMatrix& k, const SparseMatrix& c)
    : n_(static_cast<int>(k.rows())), nc_(static_cast<int>(c.rows())) {
  if (k.cols() != n_ || (nc_ > 0 && c.cols() != n_)) throw std::invalid_argument("saddle-point block dimension mismatch");
  SparseMatrix s = saddle_matrix(k, c);
  s.makeCompressed();
  lu_ = std::make_unique<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>>();
  lu_->analyzePattern(s);
  lu_->factorize(s);
  if (lu_->info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "singular saddle-point system of size " << s.rows() << ": " << lu_->lastErrorMessage();
    throw NumericError(msg.str());
  }
  const double cond = condition_estimate(s, *lu_);
  if (!(cond < 1e15)) {
    std::ostringstream msg;
    msg << "singular saddle-point system of size " << s.rows() << ": condition estimate " << cond;
    throw NumericError(msg.str());
  }
}

Vector SaddlePointSolver::solve(const Vector& f, const Vector& g) const {
  if (f.size() != n_ || g.size() != nc_) throw std::invalid_argument("saddle-point right-hand side has wrong length");
  Vector rhs(n_ + nc_);
  rhs << f, g;
  Vector x = lu_->solve(rhs);
  if (!x.allFinite()) throw NumericError("saddle-point solve produced non-finite values");
  return x.head(n_);
}

}  // namespace q3dw
