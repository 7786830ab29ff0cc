#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sizepop/coefficients.hpp"
#include "sizepop/grid.hpp"

namespace sizepop {

/// One sampled hypothesis: observed extremum against its declared bound.
struct ConditionResult {
  std::string name;
  bool pass = true;
  double observed = 0.0;
  double declared = 0.0;
  /// Location of the extremum (or of the first non-finite evaluation).
  double x = 0.0;
  double second = 0.0;  // N for coefficient checks, sigma for kernel checks
  std::string detail;
};

struct AssumptionReport {
  std::vector<ConditionResult> conditions;
  bool pass() const;
  const ConditionResult& at(const std::string& name) const;
};

/// Relative slack granted to finite-difference derivative extrema over their declared bounds.
inline constexpr double kDerivativeSlack = 1e-6;

/// Samples sample_budget sizes over [0, x_max] and n_levels environment values over [0, K]; partials
/// by central differences (one-sided at the edges of the box).
AssumptionReport check_A2_A3(const ModelCoefficients& coeffs, double x_max, std::size_t sample_budget,
                             std::size_t n_levels = 64);

struct A5Result {
  bool pass = true;
  /// Most negative product gamma_N(x, N(x)) * N'(x), 0 if none is negative.
  double worst = 0.0;
  double x = 0.0;
  std::string detail;
};

inline constexpr double kToleranceA5 = 1e-10;

A5Result check_A5(const ModelCoefficients& coeffs, const SizeProfile& env, double tol = kToleranceA5);

struct KernelCheckOptions {
  /// Sizes y and delays sigma are subsampled to at most this many nodes each.
  std::size_t max_nodes = 33;
  /// script_N samples for the environment-dependent variant, over [0, tau K].
  std::size_t n_levels = 16;
  double K = 1.0;
  /// Relative quadrature allowance on the integral conditions.
  double quadrature_tol = 1e-3;
};

/// beta >= 0, beta <= R2, int beta dx <= R0, int beta dx + int |beta_x| dx <= R1 per (sigma, y);
/// Lipschitz quotients of both integrals in script_N for the dependent variant.
AssumptionReport check_H_conditions(const RecruitmentKernel& kernel, const SizeGrid& grid, const DelayGrid& delay,
                                    const KernelCheckOptions& options = {});

}  // namespace sizepop
