#include "sizepop/semigroup.hpp"

#include <algorithm>
#include <cmath>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "sizepop/errors.hpp"
#include "sizepop/operators.hpp"
#include "sizepop/quadrature.hpp"
#include "sizepop/random.hpp"

namespace sizepop {

ProductElement::ProductElement(SizeGrid grid, DelayGrid delay)
    : grid_(grid), delay_(delay), hist_(grid.size() * delay.size(), 0.0), field_(grid.size(), 0.0) {}

ProductElement ProductElement::sample(const SizeGrid& grid, const DelayGrid& delay,
                                      const std::function<double(double, double)>& history,
                                      const std::function<double(double)>& field) {
  ProductElement e(grid, delay);
  for (std::size_t j = 0; j < delay.size(); ++j)
    for (std::size_t i = 0; i < grid.size(); ++i) e.history(j, i) = history(delay.node(j), grid.node(i));
  for (std::size_t i = 0; i < grid.size(); ++i) e.field(i) = field(grid.node(i));
  return e;
}

bool ProductElement::in_smooth_space() const {
  if (field_[0] != 0.0) return false;
  const std::size_t top = delay_.intervals();
  for (std::size_t i = 0; i < grid_.size(); ++i)
    if (history(top, i) != field_[i]) return false;
  return true;
}

ProductElement ProductElement::operator-(const ProductElement& o) const {
  if (!(grid_ == o.grid_) || !(delay_ == o.delay_)) throw DomainError("product element: grids differ");
  ProductElement r(grid_, delay_);
  for (std::size_t q = 0; q < hist_.size(); ++q) r.hist_[q] = hist_[q] - o.hist_[q];
  for (std::size_t q = 0; q < field_.size(); ++q) r.field_[q] = field_[q] - o.field_[q];
  return r;
}

namespace {

/// Per-slice X-norms of a row-major (p+1) x (m+1) array, integrated over sigma.
double e_norm(std::span<const double> rows, const SizeGrid& grid, const DelayGrid& delay) {
  std::vector<double> per(delay.size());
  for (std::size_t j = 0; j < delay.size(); ++j)
    per[j] = quad::trapezoid_abs(rows.subspan(j * grid.size(), grid.size()), grid.dx());
  return quad::trapezoid(per, delay.dsigma());
}

/// d/dsigma of the history part, same layout.
std::vector<double> sigma_derivative(const ProductElement& u) {
  const std::size_t ns = u.delay().size(), nx = u.grid().size();
  std::vector<double> out(ns * nx), col(ns);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ns; ++j) col[j] = u.history(j, i);
    const auto d = quad::derivative(col, u.delay().dsigma());
    for (std::size_t j = 0; j < ns; ++j) out[j * nx + i] = d[j];
  }
  return out;
}

}  // namespace

double history_norm(const ProductElement& u) { return e_norm(u.history_values(), u.grid(), u.delay()); }

double field_norm(const ProductElement& u) { return quad::trapezoid_abs(u.field_values(), u.grid().dx()); }

double norm_x(const ProductElement& u) { return history_norm(u) + field_norm(u); }

double norm_y(const ProductElement& u) {
  const auto ds = sigma_derivative(u);
  const auto dx = quad::derivative(u.field_values(), u.grid().dx());
  return history_norm(u) + e_norm(ds, u.grid(), u.delay()) + field_norm(u) +
         quad::trapezoid_abs(dx, u.grid().dx());
}

ProductElement apply_S(const ProductElement& u) {
  if (!u.in_smooth_space())
    throw DomainError("apply_S: element violates u_tilde(0, .) = u or u(0) = 0");
  ProductElement r(u.grid(), u.delay());
  const auto ds = sigma_derivative(u);
  const std::size_t nx = u.grid().size();
  for (std::size_t j = 0; j < u.delay().size(); ++j)
    for (std::size_t i = 0; i < nx; ++i) r.history(j, i) = -ds[j * nx + i] + u.history(j, i);
  const auto dx = quad::derivative(u.field_values(), u.grid().dx());
  for (std::size_t i = 0; i < nx; ++i) r.field(i) = dx[i] + u.field(i);
  return r;
}

namespace {

/// Weights of int_0^h e^{-a (h - s)} phi(s) ds for phi linear between phi(0) and phi(h):
/// far * phi(0) + near * phi(h). Both are positive and sum to (1 - e^{-a h}) / a.
struct ExpWeights {
  double decay, far, near;
};

ExpWeights exp_weights(double a, double h) {
  const double z = a * h;
  const double q = std::exp(-z);
  if (std::abs(z) < 1e-4) return {q, h * (0.5 - z / 3.0 + z * z / 8.0), h * (0.5 - z / 6.0 + z * z / 24.0)};
  const double one_minus_q = -std::expm1(-z);
  return {q, (one_minus_q / z - q) / a, (1.0 - one_minus_q / z) / a};
}

/// V_p = u; V_j = e^{-c ds} V_{j+1} + (exact exponential weights on linear f_tilde).
void fill_history(ProductElement& r, const ProductElement& f, double c) {
  const std::size_t nx = r.grid().size();
  const std::size_t p = r.delay().intervals();
  const ExpWeights w = exp_weights(c, r.delay().dsigma());
  for (std::size_t i = 0; i < nx; ++i) r.history(p, i) = r.field(i);
  for (std::size_t j = p; j-- > 0;)
    for (std::size_t i = 0; i < nx; ++i)
      r.history(j, i) = w.decay * r.history(j + 1, i) + w.far * f.history(j + 1, i) + w.near * f.history(j, i);
}

}  // namespace

ProductElement invert_S(const ProductElement& f) {
  ProductElement r(f.grid(), f.delay());
  const std::size_t nx = f.grid().size();
  const double h = f.grid().dx();
  const ExpWeights w = exp_weights(1.0, h);
  r.field(0) = 0.0;
  for (std::size_t i = 1; i < nx; ++i) r.field(i) = w.decay * r.field(i - 1) + w.far * f.field(i - 1) + w.near * f.field(i);
  fill_history(r, f, 1.0);
  return r;
}

ResolventResult resolvent_A1(double lambda, const DensityField& w, const ProductElement& f,
                             const ModelCoefficients& coeffs, const EnvironmentKernel& rho) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("resolvent: lambda must be positive");
  if (!(w.grid() == f.grid())) throw DomainError("resolvent: w and F live on different size grids");
  const SizeGrid& grid = f.grid();
  const std::size_t nx = grid.size();
  const double h = grid.dx();
  const SizeProfile env = environment(w, rho);
  const auto slope = quad::derivative(env.values(), h);
  std::vector<double> g(nx), a(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    const double x = grid.node(i);
    g[i] = coeffs.gamma(x, env[i]);
    if (!(g[i] > 0.0)) throw DomainError("resolvent: gamma must be positive along N^w");
    const double dg = coeffs.growth_dx(x, env[i]) + coeffs.growth_dN(x, env[i]) * slope[i];
    a[i] = (lambda + 1.0 + dg) / g[i];
  }
  ResolventResult out{ProductElement(grid, f.delay()), 0.0};
  ProductElement& r = out.value;
  r.field(0) = 0.0;
  for (std::size_t i = 1; i < nx; ++i) {
    const ExpWeights w = exp_weights(0.5 * (a[i - 1] + a[i]), h);
    r.field(i) = w.decay * r.field(i - 1) + w.far * f.field(i - 1) / g[i - 1] + w.near * f.field(i) / g[i];
  }
  fill_history(r, f, lambda + 1.0);

  std::vector<double> flux(nx), res(nx);
  for (std::size_t i = 0; i < nx; ++i) flux[i] = g[i] * r.field(i);
  const auto dflux = quad::derivative(flux, h);
  for (std::size_t i = 0; i < nx; ++i) res[i] = (lambda + 1.0) * r.field(i) + dflux[i] - f.field(i);
  out.residual = quad::trapezoid_abs(res, h);
  return out;
}

namespace {

double gauss(double x, double c, double w) {
  const double z = (x - c) / w;
  return std::exp(-0.5 * z * z);
}

/// Random signed element of the product space built from a few Gaussian bumps.
ProductElement random_element(Rng& rng, const SizeGrid& grid, const DelayGrid& delay) {
  double fa[3], fc[3], fw[3];
  for (int q = 0; q < 3; ++q) {
    fa[q] = rng.uniform(-1.0, 1.0);
    fc[q] = rng.uniform(0.0, 15.0);
    fw[q] = rng.uniform(0.3, 2.0);
  }
  double ha[2], hb[2], hc[2], hw[2];
  for (int q = 0; q < 2; ++q) {
    ha[q] = rng.uniform(-1.0, 1.0);
    hb[q] = rng.uniform(-2.0, 2.0);
    hc[q] = rng.uniform(0.0, 15.0);
    hw[q] = rng.uniform(0.3, 2.0);
  }
  return ProductElement::sample(
      grid, delay,
      [&](double s, double x) {
        double v = 0.0;
        for (int q = 0; q < 2; ++q) v += ha[q] * std::exp(hb[q] * s) * gauss(x, hc[q], hw[q]);
        return v;
      },
      [&](double x) {
        double v = 0.0;
        for (int q = 0; q < 3; ++q) v += fa[q] * gauss(x, fc[q], fw[q]);
        return v;
      });
}

DensityField random_density(Rng& rng, const SizeGrid& grid) {
  const double mass = rng.uniform(0.1, 3.0);
  const double k = rng.uniform(1.0, 6.0);
  const double theta = rng.uniform(0.3, 1.0);
  return DensityField::sample(grid, [&](double x) {
    if (x <= 0.0) return 0.0;
    return mass * std::exp(k * std::log(x) - x / theta - std::lgamma(k + 1.0) - (k + 1.0) * std::log(theta));
  });
}

/// Smooth element of the smooth space with analytic derivatives:
/// u = A x e^{-x/s}, u_tilde = e^{b sigma} u + sigma v, v a Gaussian bump.
struct SmoothDraw {
  double A, s, b, B, c, w;
  double u(double x) const { return A * x * std::exp(-x / s); }
  double du(double x) const { return A * std::exp(-x / s) * (1.0 - x / s); }
  double v(double x) const { return B * gauss(x, c, w); }
  double hist(double sig, double x) const { return std::exp(b * sig) * u(x) + sig * v(x); }
  double dhist(double sig, double x) const { return b * std::exp(b * sig) * u(x) + v(x); }
};

SmoothDraw smooth_draw(Rng& rng) {
  return {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(-2.0, 2.0),
          rng.uniform(-1.0, 1.0), rng.uniform(1.0, 6.0), rng.uniform(0.5, 1.5)};
}

struct NormSample {
  double ratio;
  double slack;
};

NormSample norm_sample(const SmoothDraw& d, const SizeGrid& grid, const DelayGrid& delay) {
  auto U = ProductElement::sample(
      grid, delay, [&](double s, double x) { return d.hist(s, x); }, [&](double x) { return d.u(x); });
  // u_tilde(0, x) = e^0 u(x) + 0 v(x) reproduces u exactly; u(0) = 0.
  const ProductElement SU = apply_S(U);
  const auto exact = ProductElement::sample(
      grid, delay, [&](double s, double x) { return -d.dhist(s, x) + d.hist(s, x); },
      [&](double x) { return d.du(x) + d.u(x); });
  const double discrete = norm_x(SU);
  const double analytic = norm_x(exact);
  return {discrete / norm_y(U), std::abs(discrete - analytic) / analytic};
}

}  // namespace

std::vector<ContractionSummary> contraction_battery(const BatterySettings& s, const ModelCoefficients& coeffs,
                                                    const EnvironmentKernel& rho) {
  const SizeGrid grid(s.x_max, s.cells);
  const DelayGrid delay(s.tau, s.intervals);
  Rng rng(s.seed);
  std::vector<DensityField> ws;
  std::vector<ProductElement> fs;
  for (std::size_t d = 0; d < s.resolvent_draws; ++d) {
    ws.push_back(random_density(rng, grid));
    fs.push_back(random_element(rng, grid, delay));
  }
  std::vector<ContractionSummary> out;
  for (double lambda : s.lambdas) {
    std::vector<double> margin(s.resolvent_draws), comp(s.resolvent_draws), resid(s.resolvent_draws);
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, s.resolvent_draws), [&](const auto& r) {
      for (std::size_t d = r.begin(); d != r.end(); ++d) {
        const auto res = resolvent_A1(lambda, ws[d], fs[d], coeffs, rho);
        const double lhs = norm_x(res.value);
        const double f_norm = norm_x(fs[d]);
        const double c = lambda + 1.0;
        const double bound = history_norm(fs[d]) / c + (1.0 / (c * c) + 1.0 / c) * field_norm(fs[d]);
        margin[d] = 1.0 - lambda * lhs / f_norm;
        comp[d] = 1.0 - lhs / bound;
        resid[d] = res.residual;
      }
    });
    ContractionSummary sum;
    sum.lambda = lambda;
    sum.draws = s.resolvent_draws;
    sum.min_margin = *std::min_element(margin.begin(), margin.end());
    sum.min_component_margin = *std::min_element(comp.begin(), comp.end());
    sum.max_residual = *std::max_element(resid.begin(), resid.end());
    for (std::size_t d = 0; d < s.resolvent_draws; ++d) {
      if (!(margin[d] > 0.0)) ++sum.violations;
      if (!(comp[d] >= -s.component_tol)) ++sum.component_violations;
    }
    out.push_back(sum);
  }
  return out;
}

NormEquivalenceSummary norm_equivalence_battery(const BatterySettings& s) {
  const SizeGrid grid(s.x_max, s.cells);
  const DelayGrid delay(s.tau, s.intervals);
  const SizeGrid fine_grid = grid.refined(2);
  const DelayGrid fine_delay = delay.refined(2);
  Rng rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<SmoothDraw> draws;
  for (std::size_t d = 0; d < s.norm_draws; ++d) draws.push_back(smooth_draw(rng));
  std::vector<NormSample> coarse(draws.size()), fine(draws.size());
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, draws.size()), [&](const auto& r) {
    for (std::size_t d = r.begin(); d != r.end(); ++d) {
      coarse[d] = norm_sample(draws[d], grid, delay);
      fine[d] = norm_sample(draws[d], fine_grid, fine_delay);
    }
  });
  NormEquivalenceSummary sum;
  sum.draws = draws.size();
  sum.lower_constant = 1.0 / (2.0 * s.tau + 3.0);
  sum.min_ratio = INFINITY;
  sum.max_ratio = 0.0;
  for (std::size_t d = 0; d < draws.size(); ++d) {
    sum.min_ratio = std::min(sum.min_ratio, coarse[d].ratio);
    sum.max_ratio = std::max(sum.max_ratio, coarse[d].ratio);
    sum.slack = std::max(sum.slack, coarse[d].slack);
    sum.refined_slack = std::max(sum.refined_slack, fine[d].slack);
    const bool ok = coarse[d].ratio >= sum.lower_constant * (1.0 - s.norm_slack) &&
                    coarse[d].ratio <= 1.0 + s.norm_slack && coarse[d].slack <= s.norm_slack;
    if (!ok) ++sum.violations;
  }
  return sum;
}

namespace {

double round_trip_error(const SizeGrid& grid, const DelayGrid& delay, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int d = 0; d < 8; ++d) {
    const double A = rng.uniform(0.5, 2.0), sc = rng.uniform(0.5, 2.0), B = rng.uniform(-1.0, 1.0);
    const double c = rng.uniform(1.0, 8.0), w = rng.uniform(0.5, 1.5), b = rng.uniform(-2.0, 2.0);
    const double C = rng.uniform(-1.0, 1.0), D = rng.uniform(-1.0, 1.0);
    const auto F = ProductElement::sample(
        grid, delay,
        [&](double s, double x) { return C * std::exp(b * s) * gauss(x, c, w) + D * s * std::exp(-x / sc); },
        [&](double x) { return A * std::exp(-x / sc) + B * gauss(x, c, w); });
    const auto back = apply_S(invert_S(F));
    worst = std::max(worst, norm_x(back - F) / norm_x(F));
  }
  return worst;
}

}  // namespace

RefinementSummary round_trip_refinement(const BatterySettings& s) {
  const SizeGrid grid(s.x_max, s.cells);
  const DelayGrid delay(s.tau, s.intervals);
  RefinementSummary r;
  r.coarse_error = round_trip_error(grid, delay, s.seed + 1);
  r.fine_error = round_trip_error(grid.refined(2), delay.refined(2), s.seed + 1);
  r.ratio = r.coarse_error / r.fine_error;
  return r;
}

ClosedFormSummary closed_form_resolvent(double dx, std::size_t intervals) {
  const double x_max = 40.0;
  const auto cells = static_cast<std::size_t>(std::llround(x_max / dx));
  const SizeGrid grid(x_max, cells);
  const DelayGrid delay(1.0, intervals);
  const auto coeffs = make_coefficients(growth::constant(1.0), mortality::constant(0.0), 1.0);
  const auto F = ProductElement::sample(
      grid, delay, [](double, double) { return 0.0; }, [](double x) { return std::exp(-x); });
  const DensityField w(grid);
  const auto res = resolvent_A1(1.0, w, F, coeffs, EnvironmentKernel::constant(0.0));
  ClosedFormSummary out;
  out.residual = res.residual;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.node(i);
    const double u = std::exp(-x) - std::exp(-2.0 * x);
    out.sup_error_field = std::max(out.sup_error_field, std::abs(res.value.field(i) - u));
    for (std::size_t j = 0; j < delay.size(); ++j)
      out.sup_error_history = std::max(out.sup_error_history,
                                       std::abs(res.value.history(j, i) - std::exp(2.0 * delay.node(j)) * u));
  }
  return out;
}

RefinementSummary resolvent_residual_refinement(const BatterySettings& s, const ModelCoefficients& coeffs,
                                                const EnvironmentKernel& rho) {
  auto residual = [&](const SizeGrid& grid, const DelayGrid& delay) {
    const DensityField w = DensityField::sample(grid, [](double x) { return x * x * std::exp(-x); });
    const auto F = ProductElement::sample(
        grid, delay, [](double sg, double x) { return std::exp(sg) * gauss(x, 4.0, 1.0); },
        [](double x) { return gauss(x, 3.0, 1.0) - 0.5 * gauss(x, 8.0, 1.5); });
    return resolvent_A1(1.0, w, F, coeffs, rho).residual;
  };
  const SizeGrid grid(s.x_max, s.cells);
  const DelayGrid delay(s.tau, s.intervals);
  RefinementSummary r;
  r.coarse_error = residual(grid, delay);
  r.fine_error = residual(grid.refined(2), delay.refined(2));
  r.ratio = r.coarse_error / r.fine_error;
  return r;
}

}  // namespace sizepop
