#include "oracles.hpp"
#include "q3dw/galerkin.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace q3dw;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// Orthonormal basis of the null space of b.
Matrix null_space(const Matrix& b) {
  Eigen::FullPivHouseholderQR<Matrix> qr(b.transpose());
  Matrix q = qr.matrixQ();
  return q.rightCols(b.cols() - qr.rank());
}

}  // namespace

class Mass : public ::testing::TestWithParam<int> {};

TEST_P(Mass, UnitCoefficientGivesIdentity) {
  auto fam = make_family(GetParam());
  IntervalBasis basis(fam, -2, 0.0, 10.0);
  const int n = basis.size();
  EXPECT_LT(max_abs(Matrix(mass_matrix(basis, 1.0)) - Matrix::Identity(n, n)), 1e-8);
  EXPECT_LT(max_abs(Matrix(mass_matrix(basis, 2.5)) - 2.5 * Matrix::Identity(n, n)), 1e-8);
}

TEST_P(Mass, FunctionCoefficientMatchesConstant) {
  auto fam = make_family(GetParam());
  IntervalBasis basis(fam, -1, 0.0, 10.0);
  const int n = basis.size();
  Coefficient c(ScalarFunction([](double) { return 3.0; }));
  EXPECT_LT(max_abs(Matrix(mass_matrix(basis, c)) - 3.0 * Matrix::Identity(n, n)), 3e-6);
  EXPECT_LT(max_abs(Matrix(mass_matrix(basis, c, 14)) - 3.0 * Matrix::Identity(n, n)), 3e-7);
}

INSTANTIATE_TEST_SUITE_P(Orders, Mass, ::testing::Values(2, 3, 6));

TEST(Mass, VariableCoefficientIsSymmetricPositive) {
  auto fam = make_family(3);
  IntervalBasis basis(fam, -1, 0.0, 10.0);
  Matrix m(mass_matrix(basis, Coefficient(ScalarFunction([](double x) { return 1.0 + 0.1 * x; }))));
  EXPECT_LT(max_abs(m - m.transpose()), 1e-12);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.99);
  EXPECT_LT(es.eigenvalues().maxCoeff(), 2.01);
}

TEST(Mass, NonFiniteCoefficientThrows) {
  auto fam = make_family(3);
  IntervalBasis basis(fam, 0, 0.0, 10.0);
  Coefficient bad(ScalarFunction([](double x) { return x > 5.0 ? std::nan("") : 1.0; }));
  EXPECT_THROW(mass_matrix(basis, bad), NumericError);
}

TEST(Stiffness, NeedsContinuousDerivative) {
  auto fam = make_family(2);
  IntervalBasis basis(fam, 0, 0.0, 10.0);
  EXPECT_THROW(stiffness_matrix(basis, 1.0), std::invalid_argument);
}

class Stiffness : public ::testing::TestWithParam<int> {};

TEST_P(Stiffness, ConstantIsAnnihilatedWithBoundaryTerm) {
  auto fam = make_family(GetParam());
  IntervalBasis basis(fam, -1, 0.0, 10.0);
  SparseMatrix a = stiffness_matrix(basis, 10.0);
  Vector one = oracle::constant_coefficients(basis);
  EXPECT_LT((a * one).cwiseAbs().maxCoeff(), 1e-6 * Matrix(a).cwiseAbs().maxCoeff());
}

TEST_P(Stiffness, NaturalFormIsSymmetricSemiDefinite) {
  auto fam = make_family(GetParam());
  IntervalBasis basis(fam, -1, 0.0, 10.0);
  Matrix a(stiffness_matrix(basis, 1.0, BoundaryTerms{false, false}));
  const double scale = max_abs(a);
  EXPECT_LT(max_abs(a - a.transpose()), 1e-12 * scale);
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  EXPECT_GT(es.eigenvalues()(0), -1e-8 * scale);
  EXPECT_GT(es.eigenvalues()(1), 1e-4);
  Vector one = oracle::constant_coefficients(basis).normalized();
  EXPECT_LT((a * one).norm(), 1e-8 * scale);
}

TEST_P(Stiffness, InteriorEntriesAreScaledConnectionCoefficients) {
  const int n = GetParam();
  auto fam = make_family(n);
  const int j = -3;
  IntervalBasis basis(fam, j, 0.0, 10.0);
  Matrix a(stiffness_matrix(basis, 1.0));
  const double s = std::pow(2.0, -2 * j);
  const int mid = basis.size() / 2;
  for (int d = -(2 * n - 1); d <= 2 * n - 1; ++d) {
    const double expected = s * fam->connection(d);
    EXPECT_NEAR(std::abs(a(mid, mid + d)), std::abs(expected), 1e-10 * s) << "offset " << d;
  }
}

TEST_P(Stiffness, FunctionCoefficientMatchesConstant) {
  auto fam = make_family(GetParam());
  IntervalBasis basis(fam, 0, 0.0, 10.0);
  Matrix exact(stiffness_matrix(basis, 2.0));
  Matrix quad(stiffness_matrix(basis, Coefficient(ScalarFunction([](double) { return 2.0; }))));
  // Trapezoid error on phi' phi' is what limits the tolerance at N = 3.
  EXPECT_LT(max_abs(exact - quad), 5e-3 * max_abs(exact));
}

TEST_P(Stiffness, DirichletEigenvalueMatchesContinuousProblem) {
  auto fam = make_family(GetParam());
  IntervalBasis basis(fam, -3, 0.0, 10.0);
  const double lambda = 10.0;
  Matrix a(stiffness_matrix(basis, lambda));
  Matrix b(2, basis.size());
  b.row(0) = endpoint_values(basis, false).transpose();
  b.row(1) = endpoint_values(basis, true).transpose();
  Matrix z = null_space(b);
  Matrix r = z.transpose() * a * z;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (r + r.transpose()));
  const double expected = lambda * std::pow(std::numbers::pi / 10.0, 2);
  EXPECT_NEAR(es.eigenvalues()(0) / expected, 1.0, 0.01);
}

INSTANTIATE_TEST_SUITE_P(Orders, Stiffness, ::testing::Values(3, 6));

TEST(Endpoints, ValuesAndDerivativesOfConstantAndLinear) {
  auto fam = make_family(3);
  IntervalBasis basis(fam, -1, 0.0, 10.0);
  Vector one = oracle::constant_coefficients(basis);
  EXPECT_NEAR(endpoint_values(basis, false).dot(one), 1.0, 1e-9);
  EXPECT_NEAR(endpoint_values(basis, true).dot(one), 1.0, 1e-9);
  EXPECT_NEAR(endpoint_derivatives(basis, true).dot(one), 0.0, 1e-8);
  Vector lin = basis.project([](double x) { return x; }, 14);
  EXPECT_NEAR(endpoint_values(basis, true).dot(lin), 10.0, 1e-6);
  EXPECT_NEAR(endpoint_derivatives(basis, false).dot(lin), 1.0, 1e-5);
}
