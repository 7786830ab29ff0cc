#include "sizepop/coefficients.hpp"

#include <algorithm>
#include <cmath>

#include "sizepop/errors.hpp"

namespace sizepop {

namespace {

constexpr double kDiffStep = 1e-6;

void require(bool ok, const std::string& msg) {
  if (!ok) throw DomainError(msg);
}

std::function<double(double)> fertility_function(const std::string& kind) {
  if (kind == "constant") return [](double) { return 1.0; };
  if (kind == "saturating") return [](double y) { return y > 0.0 ? y / (1.0 + y) : 0.0; };
  throw DomainError("unknown fertility profile '" + kind + "' (expected constant|saturating)");
}

void attach_modulation(RecruitmentKernel& k, double env_coupling) {
  require(env_coupling >= 0.0, "recruitment: env_coupling must be non-negative");
  if (env_coupling == 0.0) return;
  k.modulation = [env_coupling](double s) { return 1.0 / (1.0 + env_coupling * std::max(s, 0.0)); };
  k.modulation_lipschitz = env_coupling;
}

}  // namespace

double ModelCoefficients::growth_dx(double x, double env) const {
  if (gamma_x) return gamma_x(x, env);
  return (gamma(x + kDiffStep, env) - gamma(x - kDiffStep, env)) / (2.0 * kDiffStep);
}

double ModelCoefficients::growth_dN(double x, double env) const {
  if (gamma_N) return gamma_N(x, env);
  return (gamma(x, env + kDiffStep) - gamma(x, env - kDiffStep)) / (2.0 * kDiffStep);
}

namespace growth {

Law constant(double c) {
  require(c > 0.0 && std::isfinite(c), "growth constant: c must be positive");
  Law law;
  law.name = "constant";
  law.value = [c](double, double) { return c; };
  law.d_x = [](double, double) { return 0.0; };
  law.d_N = [](double, double) { return 0.0; };
  law.lo = law.hi = c;
  law.dx_infimum = 0.0;
  return law;
}

Law saturating(double base, double delta, double c, double K) {
  require(c >= 0.0, "growth saturating: c must be non-negative");
  require(K > 0.0, "growth saturating: K must be positive");
  const double at0 = base + delta;
  const double atK = base + delta / (1.0 + c * K);
  require(std::min(at0, atK) > 0.0, "growth saturating: gamma must stay positive on [0, K]");
  Law law;
  law.name = "saturating";
  law.value = [=](double, double n) { return base + delta / (1.0 + c * n); };
  law.d_x = [](double, double) { return 0.0; };
  law.d_N = [=](double, double n) {
    const double q = 1.0 + c * n;
    return -delta * c / (q * q);
  };
  law.lo = std::min(at0, atK);
  law.hi = std::max(at0, atK);
  law.d1 = std::abs(delta) * c;
  law.d2 = 2.0 * std::abs(delta) * c * c;
  law.dx_infimum = 0.0;
  return law;
}

Law size_decline(double base, double delta, double scale, double c, double K) {
  require(base > 0.0, "growth size_decline: base must be positive");
  require(delta >= 0.0, "growth size_decline: delta must be non-negative");
  require(scale > 0.0, "growth size_decline: scale must be positive");
  require(c >= 0.0 && K > 0.0, "growth size_decline: c >= 0 and K > 0 required");
  Law law;
  law.name = "size_decline";
  law.value = [=](double x, double n) { return (base + delta * std::exp(-x / scale)) / (1.0 + c * n); };
  law.d_x = [=](double x, double n) { return -(delta / scale) * std::exp(-x / scale) / (1.0 + c * n); };
  law.d_N = [=](double x, double n) {
    const double q = 1.0 + c * n;
    return -c * (base + delta * std::exp(-x / scale)) / (q * q);
  };
  law.lo = base / (1.0 + c * K);
  law.hi = base + delta;
  law.d1 = std::max(delta / scale, c * (base + delta));
  law.d2 = std::max({delta / (scale * scale), c * delta / scale, 2.0 * c * c * (base + delta)});
  law.dx_infimum = -delta / scale;
  return law;
}

}  // namespace growth

namespace mortality {

Law constant(double c) {
  require(c >= 0.0 && std::isfinite(c), "mortality constant: c must be non-negative");
  Law law;
  law.name = "constant";
  law.value = [c](double, double) { return c; };
  law.hi = c;
  return law;
}

Law saturating(double base, double sat, double K) {
  require(base >= 0.0 && sat >= 0.0, "mortality saturating: base and sat must be non-negative");
  Law law;
  law.name = "saturating";
  law.value = [=](double, double n) { return base + sat * n / (1.0 + n); };
  law.hi = base + sat * K / (1.0 + K);
  law.N_hi = sat;
  return law;
}

}  // namespace mortality

ModelCoefficients make_coefficients(const growth::Law& g, const mortality::Law& m, double K) {
  require(K > 0.0 && std::isfinite(K), "environment cap K must be positive");
  ModelCoefficients c;
  c.growth_family = g.name;
  c.mortality_family = m.name;
  c.gamma = g.value;
  c.gamma_x = g.d_x;
  c.gamma_N = g.d_N;
  c.mu = m.value;
  c.bounds = {g.lo, g.hi, g.d1, g.d2, m.hi, m.x_hi, m.N_hi, K};
  c.gamma_x_infimum = g.dx_infimum;
  return c;
}

EnvironmentKernel EnvironmentKernel::constant(double amplitude) {
  require(amplitude >= 0.0, "environment constant: amplitude must be non-negative");
  EnvironmentKernel k;
  k.family = Family::constant;
  k.amplitude = amplitude;
  k.rho = [amplitude](double, double) { return amplitude; };
  k.sup = amplitude;
  return k;
}

EnvironmentKernel EnvironmentKernel::gaussian(double amplitude, double width) {
  require(amplitude >= 0.0 && width > 0.0, "environment gaussian: amplitude >= 0 and width > 0 required");
  EnvironmentKernel k;
  k.family = Family::gaussian;
  k.amplitude = amplitude;
  k.width = width;
  const double inv = 1.0 / (2.0 * width * width);
  k.rho = [amplitude, inv](double x, double y) { return amplitude * std::exp(-(x - y) * (x - y) * inv); };
  k.sup = amplitude;
  return k;
}

EnvironmentKernel EnvironmentKernel::hierarchy_step(double amplitude) {
  require(amplitude >= 0.0, "environment hierarchy_step: amplitude must be non-negative");
  EnvironmentKernel k;
  k.family = Family::hierarchy_step;
  k.amplitude = amplitude;
  k.rho = [amplitude](double x, double y) { return y >= x ? amplitude : 0.0; };
  k.sup = amplitude;
  return k;
}

std::string to_string(EnvironmentKernel::Family f) {
  switch (f) {
    case EnvironmentKernel::Family::constant: return "constant";
    case EnvironmentKernel::Family::gaussian: return "gaussian";
    case EnvironmentKernel::Family::hierarchy_step: return "hierarchy_step";
    case EnvironmentKernel::Family::custom: return "custom";
  }
  return "custom";
}

double RecruitmentKernel::operator()(double sigma, double x, double y, double script_n) const {
  const double b = base(sigma, x, y);
  return modulation ? b * modulation(script_n) : b;
}

double RecruitmentKernel::r_bar() const { return std::max({R0, R1, R2}); }

double RecruitmentKernel::lipschitz_on_ball(double radius, double rho_sup) const {
  if (!modulation) return L_R;
  return R0 * (1.0 + modulation_lipschitz * rho_sup * radius);
}

RecruitmentKernel RecruitmentKernel::zero() {
  RecruitmentKernel k;
  k.family = "zero";
  k.base = [](double, double, double) { return 0.0; };
  return k;
}

RecruitmentKernel RecruitmentKernel::separable_exponential(double amplitude, double birth_scale,
                                                           double decay, const std::string& fertility,
                                                           double env_coupling) {
  require(amplitude >= 0.0, "recruitment separable: amplitude must be non-negative");
  require(birth_scale > 0.0, "recruitment separable: birth_scale must be positive");
  require(decay >= 0.0, "recruitment separable: decay must be non-negative");
  RecruitmentKernel k;
  k.family = "separable";
  auto f = fertility_function(fertility);
  SeparableFactors sf;
  sf.amplitude = amplitude;
  sf.sigma_weight = [decay](double s) { return std::exp(decay * s); };
  sf.birth_profile = [birth_scale](double x) { return std::exp(-x / birth_scale) / birth_scale; };
  sf.fertility = f;
  k.base = [sf](double s, double x, double y) {
    return sf.amplitude * sf.sigma_weight(s) * sf.birth_profile(x) * sf.fertility(y);
  };
  k.separable = sf;
  k.R0 = amplitude;
  k.R1 = amplitude * (1.0 + 1.0 / birth_scale);
  k.R2 = amplitude / birth_scale;
  k.L_R = k.R0;
  k.L_Rx = k.R1;
  attach_modulation(k, env_coupling);
  return k;
}

RecruitmentKernel RecruitmentKernel::parent_scaled(double amplitude, double birth_scale,
                                                   double size_coupling, double decay,
                                                   const std::string& fertility, double env_coupling) {
  require(amplitude >= 0.0, "recruitment parent_scaled: amplitude must be non-negative");
  require(birth_scale > 0.0, "recruitment parent_scaled: birth_scale must be positive");
  require(size_coupling >= 0.0 && decay >= 0.0,
          "recruitment parent_scaled: size_coupling and decay must be non-negative");
  RecruitmentKernel k;
  k.family = "parent_scaled";
  auto f = fertility_function(fertility);
  k.base = [=](double s, double x, double y) {
    const double yy = std::max(y, 0.0);
    const double scale = birth_scale * (1.0 + size_coupling * yy / (1.0 + yy));
    return amplitude * std::exp(decay * s) * f(y) * std::exp(-x / scale) / scale;
  };
  k.R0 = amplitude;
  k.R1 = amplitude * (1.0 + 1.0 / birth_scale);
  k.R2 = amplitude / birth_scale;
  k.L_R = k.R0;
  k.L_Rx = k.R1;
  attach_modulation(k, env_coupling);
  return k;
}

}  // namespace sizepop
