#pragma once

#include "q3dw/types.hpp"

#include <Eigen/SparseLU>

#include <memory>

namespace q3dw {

// Factored [[K, C^T], [C, 0]] with K = M + dt A, reused across time steps.
class SaddlePointSolver {
 public:
  SaddlePointSolver(const SparseMatrix& k, const SparseMatrix& c);

  int primal_size() const { return n_; }
  int constraint_count() const { return nc_; }

  // Returns the primal part of the solution of [[K, C^T], [C, 0]] [x; mu] = [f; g].
  Vector solve(const Vector& f, const Vector& g) const;

 private:
  int n_, nc_;
  std::unique_ptr<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>> lu_;
};

// Hager's 1-norm estimate of cond(K) from an existing factorization.
double condition_estimate(const SparseMatrix& k, Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>& lu);

// Stacks [[K, C^T], [C, 0]].
SparseMatrix saddle_matrix(const SparseMatrix& k, const SparseMatrix& c);

}  // namespace q3dw
