#pragma once

#include "q3dw/types.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace q3dw {

struct FamilyOptions {
  int cascade_depth = 14;
  // Unset: derivative samples are built whenever N >= 3.
  std::optional<bool> derivatives;
};

// Daubechies-N filter bank with dyadic samples of phi, psi and phi' on
// [0, 2N-1], plus the exact translate integrals the Galerkin matrices need.
class WaveletFamily {
 public:
  WaveletFamily(int n, const FamilyOptions& options);

  int vanishing_moments() const { return n_; }
  int support() const { return 2 * n_ - 1; }
  int depth() const { return depth_; }
  double spacing() const { return spacing_; }
  bool has_derivative() const { return !dphi_.empty(); }

  const std::vector<double>& lowpass() const { return h_; }
  const std::vector<double>& highpass() const { return g_; }
  const std::vector<double>& phi_samples() const { return phi_; }
  const std::vector<double>& psi_samples() const { return psi_; }
  const std::vector<double>& dphi_samples() const { return dphi_; }

  // Linear interpolation between cascade samples; zero outside the support.
  double phi(double y) const { return interpolate(phi_, y); }
  double psi(double y) const { return interpolate(psi_, y); }
  double dphi(double y) const;

  double phi_at_integer(int k) const;
  double dphi_at_integer(int k) const;

  // int_s^inf phi(y) phi(y - m) dy
  double partial_mass(int s, int m) const;
  // int_s^inf phi'(y) phi'(y - m) dy
  double partial_stiffness(int s, int m) const;
  // int_R phi'(y) phi'(y - m) dy
  double connection(int m) const;

 private:
  double interpolate(const std::vector<double>& table, double y) const;
  void build_filters();
  void build_cascade();
  void build_integrals();

  int n_;
  int depth_;
  double spacing_;
  std::vector<double> h_, g_;
  std::vector<double> phi_, psi_, dphi_;
  std::vector<double> phi_int_, dphi_int_;
  // Tables indexed [s - s_lo][m + S - 1].
  std::vector<double> mass_table_, stiff_table_, connection_;
  int s_lo_ = 0, s_hi_ = 0;
};

using FamilyPtr = std::shared_ptr<const WaveletFamily>;

FamilyPtr make_family(int n, const FamilyOptions& options = {});
FamilyPtr make_family(int n, int cascade_depth);

// Minimum-phase Daubechies low-pass filter, sum h = sqrt(2).
std::vector<double> daubechies_lowpass(int n);

}  // namespace q3dw
