#pragma once

#include <functional>
#include <optional>
#include <string>

namespace sizepop {

using RateFunction = std::function<double(double x, double env)>;

/// Declared bounds on Omega = [0, inf) x [0, K]. Names follow the vital-rate hypotheses:
/// gamma_lo <= gamma <= gamma_hi, |gamma_x|,|gamma_N| <= gamma_d1, second partials <= gamma_d2,
/// 0 <= mu <= mu_hi, |mu_x| <= mu_x_hi, |mu_N| <= mu_N_hi.
struct CoefficientBounds {
  double gamma_lo = 0.0;
  double gamma_hi = 0.0;
  double gamma_d1 = 0.0;
  double gamma_d2 = 0.0;
  double mu_hi = 0.0;
  double mu_x_hi = 0.0;
  double mu_N_hi = 0.0;
  double K = 1.0;
};

/// Growth rate gamma(x, N) and mortality mu(x, N) with their declared bounds.
struct ModelCoefficients {
  std::string growth_family;
  std::string mortality_family;
  RateFunction gamma;
  RateFunction mu;
  // Analytic partials; left empty, they fall back to central differences.
  RateFunction gamma_x;
  RateFunction gamma_N;
  CoefficientBounds bounds;
  // Analytic infimum of gamma_x over Omega, when the family knows it.
  std::optional<double> gamma_x_infimum;

  double growth(double x, double env) const { return gamma(x, env); }
  double mortality(double x, double env) const { return mu(x, env); }
  double growth_dx(double x, double env) const;
  double growth_dN(double x, double env) const;
};

/// Parametric growth laws. Each factory validates its documented parameter range and declares
/// bounds valid on [0, inf) x [0, K].
namespace growth {

struct Law {
  std::string name;
  RateFunction value, d_x, d_N;
  double lo = 0.0, hi = 0.0, d1 = 0.0, d2 = 0.0;
  std::optional<double> dx_infimum;
};

/// gamma = c, c > 0.
Law constant(double c);
/// gamma = base + delta / (1 + c N); requires c >= 0 and a positive minimum over [0, K].
Law saturating(double base, double delta, double c, double K);
/// gamma = (base + delta exp(-x / scale)) / (1 + c N); base > 0, delta >= 0, scale > 0, c >= 0.
Law size_decline(double base, double delta, double scale, double c, double K);

}  // namespace growth

namespace mortality {

struct Law {
  std::string name;
  RateFunction value;
  double hi = 0.0, x_hi = 0.0, N_hi = 0.0;
};

/// mu = c, c >= 0.
Law constant(double c);
/// mu = base + sat N / (1 + N); base >= 0, sat >= 0.
Law saturating(double base, double sat, double K);

}  // namespace mortality

ModelCoefficients make_coefficients(const growth::Law& g, const mortality::Law& m, double K);

/// Interaction kernel rho(x, y) of the environment N[n](x) = int rho(x, y) n(y) dy.
struct EnvironmentKernel {
  enum class Family { constant, gaussian, hierarchy_step, custom };

  Family family = Family::constant;
  double amplitude = 0.0;
  double width = 1.0;
  std::function<double(double x, double y)> rho;
  double sup = 0.0;

  double operator()(double x, double y) const { return rho(x, y); }

  static EnvironmentKernel constant(double amplitude);
  /// amplitude * exp(-(x - y)^2 / (2 width^2)).
  static EnvironmentKernel gaussian(double amplitude, double width);
  /// amplitude * 1{y >= x}: the environment is the biomass of larger individuals.
  static EnvironmentKernel hierarchy_step(double amplitude);
};

std::string to_string(EnvironmentKernel::Family f);

/// beta = amplitude * w(sigma) * b(x) * f(y); enables an O(m p) recruitment evaluation.
struct SeparableFactors {
  double amplitude = 0.0;
  std::function<double(double)> sigma_weight;
  std::function<double(double)> birth_profile;
  std::function<double(double)> fertility;
};

/// Recruitment rate beta(sigma, x, y), optionally modulated by the delayed environment:
/// beta(sigma, x, y, script_N) = base(sigma, x, y) * modulation(script_N), modulation in [0, 1].
struct RecruitmentKernel {
  std::string family = "zero";
  std::function<double(double sigma, double x, double y)> base;
  std::function<double(double script_n)> modulation;
  double modulation_lipschitz = 0.0;
  std::optional<SeparableFactors> separable;

  // Declared constants: int beta dx <= R0, W^{1,1} norm in x <= R1, beta <= R2,
  // Lipschitz constants of the integrated recruitment in L1 and W^{1,1}.
  double R0 = 0.0, R1 = 0.0, R2 = 0.0, L_R = 0.0, L_Rx = 0.0;

  bool is_zero() const { return family == "zero"; }
  bool depends_on_environment() const { return static_cast<bool>(modulation); }
  double operator()(double sigma, double x, double y) const { return base(sigma, x, y); }
  double operator()(double sigma, double x, double y, double script_n) const;
  double r_bar() const;

  /// L1 Lipschitz constant of the integrated recruitment over histories with E-norm <= radius.
  /// Linear kernels return R0; the modulated variant adds R0 * Lg * rho_sup * radius.
  double lipschitz_on_ball(double radius, double rho_sup) const;

  static RecruitmentKernel zero();
  /// amplitude * exp(decay * sigma) * exp(-x / birth_scale) / birth_scale * f(y),
  /// f = 1 ("constant") or y / (1 + y) ("saturating"). env_coupling > 0 multiplies by
  /// 1 / (1 + env_coupling * script_N).
  static RecruitmentKernel separable_exponential(double amplitude, double birth_scale, double decay,
                                                 const std::string& fertility, double env_coupling);
  /// Offspring size scale grows with parent size: s(y) = birth_scale * (1 + size_coupling y / (1 + y)).
  static RecruitmentKernel parent_scaled(double amplitude, double birth_scale, double size_coupling,
                                         double decay, const std::string& fertility,
                                         double env_coupling);
};

/// Everything a solver needs besides the initial history.
struct Model {
  ModelCoefficients coefficients;
  EnvironmentKernel environment;
  RecruitmentKernel recruitment;
};

}  // namespace sizepop
