#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sizepop/coefficients.hpp"
#include "sizepop/grid.hpp"

namespace sizepop {

/// Element (u_tilde, u) of the product space: a sampled history part on the delay x size grid and
/// a field part on the size grid.
class ProductElement {
 public:
  ProductElement(SizeGrid grid, DelayGrid delay);

  static ProductElement sample(const SizeGrid& grid, const DelayGrid& delay,
                               const std::function<double(double sigma, double x)>& history,
                               const std::function<double(double x)>& field);

  const SizeGrid& grid() const { return grid_; }
  const DelayGrid& delay() const { return delay_; }
  double& history(std::size_t j, std::size_t i) { return hist_[j * grid_.size() + i]; }
  double history(std::size_t j, std::size_t i) const { return hist_[j * grid_.size() + i]; }
  double& field(std::size_t i) { return field_[i]; }
  double field(std::size_t i) const { return field_[i]; }
  std::span<const double> history_row(std::size_t j) const {
    return std::span<const double>(hist_).subspan(j * grid_.size(), grid_.size());
  }
  std::span<const double> history_values() const { return hist_; }
  std::span<const double> field_values() const { return field_; }

  /// u_tilde(0, .) == u and u(0) == 0, compared exactly.
  bool in_smooth_space() const;

  ProductElement operator-(const ProductElement& other) const;

 private:
  SizeGrid grid_;
  DelayGrid delay_;
  std::vector<double> hist_;
  std::vector<double> field_;
};

/// ||u_tilde||_E + ||u||_X.
double norm_x(const ProductElement& u);
/// ||u_tilde||_E + ||d u_tilde / d sigma||_E + ||u||_Y (central differences).
double norm_y(const ProductElement& u);
/// Separate parts of norm_x.
double history_norm(const ProductElement& u);
double field_norm(const ProductElement& u);

/// S(u_tilde, u) = (-d u_tilde / d sigma + u_tilde, u' + u); rejects elements outside the smooth space.
ProductElement apply_S(const ProductElement& u);

/// u = e^{-x} int_0^x e^s f ds, u_tilde(sigma) = e^sigma u + int_sigma^0 e^{sigma - xi} f_tilde(xi) dxi by
/// recursions with exact exponential weights on piecewise-linear data; the result satisfies u_tilde(0) = u and u(0) = 0 exactly.
ProductElement invert_S(const ProductElement& f);

struct ResolventResult {
  ProductElement value;
  /// X-norm of lambda u + u + (gamma u)' - f.
  double residual = 0.0;
};

/// Resolvent of -A_1(w): (lambda + 1) u + (gamma(., N^w) u)' = f with u(0) = 0, and
/// u_tilde(sigma) = e^{c sigma} u + int_sigma^0 e^{c (sigma - xi)} f_tilde(xi) dxi, c = lambda + 1.
ResolventResult resolvent_A1(double lambda, const DensityField& w, const ProductElement& f,
                             const ModelCoefficients& coeffs, const EnvironmentKernel& rho);

/// Grids and draw counts of the randomized batteries.
struct BatterySettings {
  double x_max = 40.0;
  std::size_t cells = 400;
  double tau = 1.0;
  std::size_t intervals = 20;
  std::uint64_t seed = 20240521;
  std::size_t resolvent_draws = 256;
  std::size_t norm_draws = 64;
  std::vector<double> lambdas{0.5, 1.0, 2.0, 10.0};
  /// Relative allowance for the discrete per-component resolvent bound.
  double component_tol = 1e-3;
  /// Allowed discretization slack on the norm-equivalence inequalities.
  double norm_slack = 0.02;
};

struct ContractionSummary {
  double lambda = 0.0;
  std::size_t draws = 0;
  std::size_t violations = 0;
  std::size_t component_violations = 0;
  /// min over draws of 1 - lambda ||R F|| / ||F||.
  double min_margin = 0.0;
  /// min over draws of 1 - ||R F|| / (component bound).
  double min_component_margin = 0.0;
  double max_residual = 0.0;
};

/// ||R(lambda) F|| <= ||F|| / lambda and the per-component bound on seeded random (w, F).
std::vector<ContractionSummary> contraction_battery(const BatterySettings& s, const ModelCoefficients& coeffs,
                                                    const EnvironmentKernel& rho);

struct NormEquivalenceSummary {
  std::size_t draws = 0;
  std::size_t violations = 0;
  /// min over draws of ||S U|| / ||U||_Y; the bounds are 1 / (2 tau + 3) and 1.
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  /// max relative gap between the discrete ||S U|| and the one from analytic derivatives.
  double slack = 0.0;
  /// Slack of the same draws with both spacings halved.
  double refined_slack = 0.0;
  double lower_constant = 0.0;
};

NormEquivalenceSummary norm_equivalence_battery(const BatterySettings& s);

struct RefinementSummary {
  double coarse_error = 0.0;
  double fine_error = 0.0;
  double ratio = 0.0;
};

/// Relative X-norm error of apply_S(invert_S(F)) on a smooth F at the battery grid and its refinement.
RefinementSummary round_trip_refinement(const BatterySettings& s);

/// gamma = 1, lambda = 1, F = (0, e^{-x}) on [0, 40] at the given spacing; sup error against
/// u = e^{-x} - e^{-2x}.
struct ClosedFormSummary {
  double sup_error_field = 0.0;
  double sup_error_history = 0.0;
  double residual = 0.0;
};
ClosedFormSummary closed_form_resolvent(double dx, std::size_t intervals = 20);

/// Resolvent residual at the battery grid and its refinement, for a smooth (w, F).
RefinementSummary resolvent_residual_refinement(const BatterySettings& s, const ModelCoefficients& coeffs,
                                                const EnvironmentKernel& rho);

}  // namespace sizepop
