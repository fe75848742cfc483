#include "q3dw/wavelet_family.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace q3dw;

namespace {

double trapezoid(const std::vector<double>& f, double h) {
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += (i == 0 || i + 1 == f.size()) ? 0.5 * f[i] : f[i];
  return acc * h;
}

}  // namespace

TEST(Filters, HaarIsTwoTap) {
  auto h = daubechies_lowpass(1);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_DOUBLE_EQ(h[0], 1.0 / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(h[1], 1.0 / std::sqrt(2.0));
}

TEST(Filters, DaubechiesFourMatchesClosedForm) {
  // (1 + s, 3 + s, 3 - s, 1 - s) / (4 sqrt 2) with s = sqrt 3.
  const double s = std::sqrt(3.0), d = 4.0 * std::sqrt(2.0);
  const std::vector<double> expected{(1 + s) / d, (3 + s) / d, (3 - s) / d, (1 - s) / d};
  auto h = daubechies_lowpass(2);
  ASSERT_EQ(h.size(), 4u);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(h[k], expected[k], 1e-14);
  EXPECT_NEAR(h[0], 0.48296, 1e-5);
  EXPECT_NEAR(h[3], -0.12941, 1e-5);
}

class FilterBank : public ::testing::TestWithParam<int> {};

TEST_P(FilterBank, NormalizedAndShiftOrthonormal) {
  const int n = GetParam();
  auto h = daubechies_lowpass(n);
  ASSERT_EQ(static_cast<int>(h.size()), 2 * n);
  EXPECT_NEAR(std::accumulate(h.begin(), h.end(), 0.0), std::sqrt(2.0), 1e-13);
  for (int m = 0; m < n; ++m) {
    double acc = 0.0;
    for (int k = 0; k + 2 * m < 2 * n; ++k) acc += h[k] * h[k + 2 * m];
    EXPECT_NEAR(acc, m == 0 ? 1.0 : 0.0, 1e-12) << "shift " << m;
  }
}

TEST_P(FilterBank, HighpassHasDiscreteVanishingMoments) {
  const int n = GetParam();
  auto fam = make_family(n, FamilyOptions{10, false});
  const auto& g = fam->highpass();
  for (int p = 0; p < n; ++p) {
    double acc = 0.0;
    for (int k = 0; k < 2 * n; ++k) acc += std::pow(double(k), p) * g[k];
    EXPECT_NEAR(acc, 0.0, 1e-9 * std::pow(2.0 * n, p)) << "moment " << p;
  }
}

INSTANTIATE_TEST_SUITE_P(Orders, FilterBank, ::testing::Values(1, 2, 3, 4, 6, 8));

TEST(Family, RejectsBadArguments) {
  EXPECT_THROW(make_family(0), std::invalid_argument);
  EXPECT_THROW(make_family(3, 5), std::invalid_argument);
  try {
    make_family(2, FamilyOptions{12, true});
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient regularity"), std::string::npos);
  }
  EXPECT_FALSE(make_family(2)->has_derivative());
  EXPECT_TRUE(make_family(3)->has_derivative());
}

class Cascade : public ::testing::TestWithParam<int> {};

TEST_P(Cascade, ScalingFunctionIntegratesToOne) {
  auto fam = make_family(GetParam(), 12);
  EXPECT_NEAR(trapezoid(fam->phi_samples(), fam->spacing()), 1.0, 1e-10);
  EXPECT_DOUBLE_EQ(fam->phi(-0.25), 0.0);
  EXPECT_DOUBLE_EQ(fam->phi(fam->support() + 0.25), 0.0);
}

TEST_P(Cascade, IntegerValuesSumToOne) {
  auto fam = make_family(GetParam(), 12);
  double acc = 0.0;
  for (int k = 0; k <= fam->support(); ++k) acc += fam->phi_at_integer(k);
  EXPECT_NEAR(acc, 1.0, 1e-13);
}

TEST_P(Cascade, WaveletHasVanishingMoments) {
  const int n = GetParam();
  auto fam = make_family(n, 14);
  const auto& psi = fam->psi_samples();
  for (int p = 0; p < n; ++p) {
    std::vector<double> f(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) f[i] = std::pow(i * fam->spacing(), p) * psi[i];
    EXPECT_NEAR(trapezoid(f, fam->spacing()), 0.0, 1e-6) << "moment " << p;
  }
}

TEST_P(Cascade, PartialIntegralsAgreeWithQuadrature) {
  const int n = GetParam();
  auto fam = make_family(n, 14);
  const int s = fam->support();
  const long unit = 1L << fam->depth();
  const auto& phi = fam->phi_samples();
  for (int m = -(s - 1); m <= s - 1; ++m)
    for (int sv = -1; sv <= s + 1; ++sv) {
      const long lo = std::max<long>({sv, 0, m}) * unit, hi = std::min(s, m + s) * unit;
      double acc = 0.0;
      for (long i = lo; i <= hi; ++i) acc += ((i == lo || i == hi) ? 0.5 : 1.0) * phi[i] * phi[i - m * unit];
      if (hi < lo) acc = 0.0;
      // Trapezoid error dominates for the rough N = 2 function.
      EXPECT_NEAR(fam->partial_mass(sv, m), acc / unit, n == 2 ? 1e-7 : 1e-8) << "s=" << sv << " m=" << m;
    }
}

INSTANTIATE_TEST_SUITE_P(Orders, Cascade, ::testing::Values(2, 3, 6));

TEST(Family, DerivativeSamplesMatchDifferenceQuotients) {
  auto fam = make_family(6, 14);
  const auto& phi = fam->phi_samples();
  const double h = fam->spacing();
  double err = 0.0;
  for (std::size_t i = 1; i + 1 < phi.size(); i += 97)
    err = std::max(err, std::abs((phi[i + 1] - phi[i - 1]) / (2 * h) - fam->dphi_samples()[i]));
  EXPECT_LT(err, 1e-5);
}

TEST(Family, ConnectionCoefficients) {
  // Frozen from an independent numpy solve of the autocorrelation eigenproblem
  // (filters from np.roots); N = 6 also checked by quadrature below.
  auto f3 = make_family(3);
  auto f6 = make_family(6);
  EXPECT_NEAR(f3->connection(0), 5.267857142857, 1e-9);
  EXPECT_NEAR(f6->connection(0), 3.686063482147, 1e-9);
  double row = 0.0, second = 0.0;
  for (int m = -10; m <= 10; ++m) {
    row += f6->connection(m);
    second += double(m) * m * f6->connection(m);
  }
  EXPECT_NEAR(row, 0.0, 1e-11);
  EXPECT_NEAR(second, -2.0, 1e-11);

  const auto& d = f6->dphi_samples();
  const long unit = 1L << f6->depth();
  for (int m = 0; m <= 3; ++m) {
    double acc = 0.0;
    const long lo = m * unit, hi = 11 * unit;
    for (long i = lo; i <= hi; ++i) acc += ((i == lo || i == hi) ? 0.5 : 1.0) * d[i] * d[i - m * unit];
    EXPECT_NEAR(f6->connection(m), acc / unit, 1e-7) << "m=" << m;
  }
}

TEST(Family, PartialStiffnessIsConsistentWithConnection) {
  auto fam = make_family(6);
  // int_s^inf + int_-inf^s = full line; the left part equals K(s - m, -m) mirrored.
  for (int m = -3; m <= 3; ++m)
    for (int s = 1; s < 10; ++s)
      EXPECT_NEAR(fam->partial_stiffness(s, m), fam->partial_stiffness(s - m, -m), 1e-9);
  for (int m = -10; m <= 10; ++m) EXPECT_DOUBLE_EQ(fam->partial_stiffness(-20, m), fam->connection(m));
}
