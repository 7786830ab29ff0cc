#pragma once

#include <span>
#include <string>
#include <vector>

#include "sizepop/coefficients.hpp"
#include "sizepop/grid.hpp"

namespace sizepop {

/// X: L1 in size. Y: L1 plus L1 of the size derivative. E: L1 over [-tau, 0] x size. Sup: max |.|.
enum class NormKind { X, Y, E, Sup };

std::string to_string(NormKind k);

/// X, Y or Sup of a single slice; E is a shape mismatch.
double norm(const DensityField& u, NormKind kind);
/// E or Sup of a history segment; X and Y are shape mismatches.
double norm(const HistoryBuffer& h, NormKind kind);
/// Product-space norm ||(h, u)|| = ||h||_E + ||u||_X.
double product_norm(const HistoryBuffer& h, const DensityField& u);
/// ||h||_E + ||d h / d sigma||_E + ||u||_Y.
double product_norm_smooth(const HistoryBuffer& h, const DensityField& u);
/// E-norm of the sigma-derivative of the segment (differences across slices).
double sigma_derivative_norm(const HistoryBuffer& h);

/// N[n](x_i) = trapezoid over y of rho(x_i, y) n(y), bound to one size grid.
///
/// The hierarchy-step kernel is evaluated as the trapezoid of the tail integral over [x_i, x_max];
/// Gaussian and custom kernels cache the weighted kernel matrix.
class EnvironmentOperator {
 public:
  EnvironmentOperator(EnvironmentKernel kernel, SizeGrid grid);

  SizeProfile apply(const DensityField& n) const;
  const EnvironmentKernel& kernel() const { return kernel_; }
  const SizeGrid& grid() const { return grid_; }

 private:
  EnvironmentKernel kernel_;
  SizeGrid grid_;
  std::vector<double> weighted_;  // (m+1)^2, row i holds w_k rho(x_i, y_k)
};

SizeProfile environment(const DensityField& n, const EnvironmentKernel& rho);

/// Flag (not clamp) environment values above the cap K of Omega.
bool exceeds_cap(const SizeProfile& profile, double K);

/// script_N(sigma_j, x_i) for every delay node: trapezoid over xi in [sigma_j, 0] of the slice
/// environments. Row-major (p+1) x (m+1); row p is zero.
std::vector<double> script_n_table(std::span<const SizeProfile* const> slice_env, const DelayGrid& delay);

/// script_N(sigma, .) for one delay coordinate. Nodes xi_j >= sigma are summed with trapezoid
/// weights; an off-node sigma is not resolved below the first node above it.
SizeProfile script_N(const HistoryBuffer& h, const EnvironmentKernel& rho, double sigma);

/// int_{-tau}^0 R[n(t + sigma)](x) dsigma as a double trapezoid over the delay and size grids.
class RecruitmentOperator {
 public:
  RecruitmentOperator(RecruitmentKernel kernel, EnvironmentKernel rho, SizeGrid grid, DelayGrid delay);

  /// `slice_env` holds the environment profile of each slice; it may be empty when the kernel
  /// does not depend on the environment.
  SizeProfile apply(const HistoryBuffer& h, std::span<const SizeProfile* const> slice_env) const;
  SizeProfile apply(const HistoryBuffer& h) const;

  const RecruitmentKernel& kernel() const { return kernel_; }
  const EnvironmentOperator& environment() const { return env_; }

  /// Evaluate the kernel through the generic O(m^2 p) path even when it is separable.
  void force_generic(bool on) { force_generic_ = on; }

 private:
  void check(const HistoryBuffer& h) const;
  SizeProfile apply_separable(const HistoryBuffer& h, const std::vector<double>* script_n) const;
  SizeProfile apply_generic(const HistoryBuffer& h, const std::vector<double>* script_n) const;

  RecruitmentKernel kernel_;
  EnvironmentOperator env_;
  SizeGrid grid_;
  DelayGrid delay_;
  std::vector<double> wy_, wsigma_;
  std::vector<double> birth_, fert_w_, sigma_w_;
  bool force_generic_ = false;
};

SizeProfile recruitment(const HistoryBuffer& h, const RecruitmentKernel& kernel, const EnvironmentKernel& rho);

}  // namespace sizepop
