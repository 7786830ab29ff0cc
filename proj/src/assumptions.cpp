#include "sizepop/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "sizepop/errors.hpp"
#include "sizepop/quadrature.hpp"

namespace sizepop {

bool AssumptionReport::pass() const {
  return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) { return c.pass; });
}

const ConditionResult& AssumptionReport::at(const std::string& name) const {
  for (const auto& c : conditions)
    if (c.name == name) return c;
  throw DomainError("assumption report has no condition '" + name + "'");
}

namespace {

using Fn2 = std::function<double(double, double)>;

/// Stencil offsets for a first or second difference that stay inside [lo, hi].
double diff1(const std::function<double(double)>& f, double v, double h, double lo, double hi) {
  if (v - h < lo) return (-3.0 * f(v) + 4.0 * f(v + h) - f(v + 2.0 * h)) / (2.0 * h);
  if (v + h > hi) return (3.0 * f(v) - 4.0 * f(v - h) + f(v - 2.0 * h)) / (2.0 * h);
  return (f(v + h) - f(v - h)) / (2.0 * h);
}

double diff2(const std::function<double(double)>& f, double v, double h, double lo, double hi) {
  if (v - h < lo) return (2.0 * f(v) - 5.0 * f(v + h) + 4.0 * f(v + 2.0 * h) - f(v + 3.0 * h)) / (h * h);
  if (v + h > hi) return (2.0 * f(v) - 5.0 * f(v - h) + 4.0 * f(v - 2.0 * h) - f(v - 3.0 * h)) / (h * h);
  return (f(v + h) - 2.0 * f(v) + f(v - h)) / (h * h);
}

/// Running extremum of one condition.
struct Tracker {
  ConditionResult r;
  bool want_max = true;
  bool seen = false;
  bool broken = false;

  Tracker(std::string name, double declared, bool maximum) : want_max(maximum) {
    r.name = std::move(name);
    r.declared = declared;
  }
  void add(double value, double x, double second) {
    if (broken) return;
    if (!std::isfinite(value)) {
      broken = true;
      r.pass = false;
      r.observed = value;
      r.x = x;
      r.second = second;
      r.detail = fmt::format("non-finite evaluation at x = {:.6g}, second = {:.6g}", x, second);
      return;
    }
    if (!seen || (want_max ? value > r.observed : value < r.observed)) {
      r.observed = value;
      r.x = x;
      r.second = second;
      seen = true;
    }
  }
  ConditionResult finish(double slack) {
    if (broken) return r;
    r.pass = want_max ? r.observed <= r.declared + slack : r.observed >= r.declared - slack;
    if (!r.pass)
      r.detail = fmt::format("observed {} {:.9g} {} declared {:.9g} at x = {:.6g}, second = {:.6g}",
                             want_max ? "max" : "min", r.observed, want_max ? ">" : "<", r.declared, r.x, r.second);
    return r;
  }
};

std::vector<double> subsample(std::size_t count, std::size_t limit) {
  std::vector<double> idx;
  if (count <= limit) {
    for (std::size_t i = 0; i < count; ++i) idx.push_back(static_cast<double>(i));
    return idx;
  }
  for (std::size_t q = 0; q < limit; ++q)
    idx.push_back(std::round(static_cast<double>(q) * static_cast<double>(count - 1) / static_cast<double>(limit - 1)));
  return idx;
}

}  // namespace

AssumptionReport check_A2_A3(const ModelCoefficients& c, double x_max, std::size_t sample_budget,
                             std::size_t n_levels) {
  if (sample_budget < 1) throw DomainError("check_A2_A3: sample_budget must be at least 1");
  if (!(c.bounds.K > 0.0)) throw DomainError("check_A2_A3: K must be positive");
  if (!(x_max > 0.0)) throw DomainError("check_A2_A3: x_max must be positive");
  if (n_levels < 1) throw DomainError("check_A2_A3: at least one environment level required");
  const auto& b = c.bounds;
  const double K = b.K;
  const double hx = 1e-4 * std::max(1.0, x_max);
  const double hn = 1e-4 * std::max(1.0, K);

  Tracker g_lo("gamma_lower", b.gamma_lo, false), g_hi("gamma_upper", b.gamma_hi, true);
  Tracker g_pos("gamma_positive", 0.0, false);
  Tracker g_d1("gamma_d1", b.gamma_d1, true), g_d2("gamma_d2", b.gamma_d2, true);
  Tracker m_lo("mu_nonnegative", 0.0, false), m_hi("mu_upper", b.mu_hi, true);
  Tracker m_x("mu_x", b.mu_x_hi, true), m_n("mu_N", b.mu_N_hi, true);

  const auto step = [](double hi, std::size_t n, std::size_t i) {
    return n == 1 ? 0.0 : hi * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  const double xhi = x_max + 3.0 * hx;  // stencils may reach past x_max; the domain is [0, inf)
  for (std::size_t i = 0; i < sample_budget; ++i) {
    const double x = step(x_max, sample_budget, i);
    for (std::size_t l = 0; l < n_levels; ++l) {
      const double n = step(K, n_levels, l);
      const double g = c.gamma(x, n);
      g_lo.add(g, x, n);
      g_hi.add(g, x, n);
      g_pos.add(g, x, n);
      auto gx = [&](double v) { return c.gamma(v, n); };
      auto gn = [&](double v) { return c.gamma(x, v); };
      const double d_x = diff1(gx, x, hx, 0.0, xhi);
      const double d_n = diff1(gn, n, hn, 0.0, K);
      g_d1.add(std::max(std::abs(d_x), std::abs(d_n)), x, n);
      const double d_xx = diff2(gx, x, hx, 0.0, xhi);
      const double d_nn = diff2(gn, n, hn, 0.0, K);
      auto gx_at = [&](double v) { return diff1([&](double u) { return c.gamma(u, v); }, x, hx, 0.0, xhi); };
      const double d_xn = diff1(gx_at, n, hn, 0.0, K);
      g_d2.add(std::max({std::abs(d_xx), std::abs(d_nn), std::abs(d_xn)}), x, n);

      const double m = c.mu(x, n);
      m_lo.add(m, x, n);
      m_hi.add(m, x, n);
      m_x.add(std::abs(diff1([&](double v) { return c.mu(v, n); }, x, hx, 0.0, xhi)), x, n);
      m_n.add(std::abs(diff1([&](double v) { return c.mu(x, v); }, n, hn, 0.0, K)), x, n);
    }
  }
  const auto slack = [](double declared) { return kDerivativeSlack * std::max(1.0, std::abs(declared)); };
  const auto exact = [](double declared) { return 1e-12 * std::max(1.0, std::abs(declared)); };
  AssumptionReport rep;
  auto pos = g_pos.finish(0.0);
  if (pos.pass && !(pos.observed > 0.0)) {
    pos.pass = false;
    pos.detail = fmt::format("gamma is not strictly positive: {:.9g} at x = {:.6g}, N = {:.6g}", pos.observed, pos.x,
                             pos.second);
  }
  rep.conditions.push_back(pos);
  auto lo = g_lo.finish(exact(b.gamma_lo));
  if (!(b.gamma_lo > 0.0)) {
    lo.pass = false;
    lo.detail = "declared gamma_lo must be positive";
  }
  rep.conditions.push_back(lo);
  rep.conditions.push_back(g_hi.finish(exact(b.gamma_hi)));
  rep.conditions.push_back(g_d1.finish(slack(b.gamma_d1)));
  rep.conditions.push_back(g_d2.finish(slack(b.gamma_d2)));
  rep.conditions.push_back(m_lo.finish(0.0));
  rep.conditions.push_back(m_hi.finish(exact(b.mu_hi)));
  rep.conditions.push_back(m_x.finish(slack(b.mu_x_hi)));
  rep.conditions.push_back(m_n.finish(slack(b.mu_N_hi)));
  return rep;
}

A5Result check_A5(const ModelCoefficients& c, const SizeProfile& env, double tol) {
  // Central differences inside, first-order one-sided at the ends: both keep the sign of a monotone profile.
  auto slope = quad::derivative(env.values(), env.grid().dx());
  if (env.size() >= 3) {
    const std::size_t m = env.size() - 1;
    slope[0] = (env[1] - env[0]) / env.grid().dx();
    slope[m] = (env[m] - env[m - 1]) / env.grid().dx();
  }
  A5Result r;
  for (std::size_t i = 0; i < env.size(); ++i) {
    const double x = env.grid().node(i);
    const double prod = c.growth_dN(x, env[i]) * slope[i];
    if (!std::isfinite(prod)) {
      r.pass = false;
      r.worst = prod;
      r.x = x;
      r.detail = fmt::format("non-finite product at x = {:.6g}", x);
      return r;
    }
    if (prod < r.worst) {
      r.worst = prod;
      r.x = x;
    }
  }
  r.pass = r.worst >= -tol;
  if (!r.pass) r.detail = fmt::format("gamma_N * N' = {:.9g} < -{:.0e} at x = {:.6g}", r.worst, tol, r.x);
  return r;
}

AssumptionReport check_H_conditions(const RecruitmentKernel& kernel, const SizeGrid& grid, const DelayGrid& delay,
                                    const KernelCheckOptions& opt) {
  const std::size_t nx = grid.size();
  const double h = grid.dx();
  const auto ys = subsample(nx, opt.max_nodes);
  const auto ss = subsample(delay.size(), opt.max_nodes);
  std::vector<double> levels{0.0};
  if (kernel.depends_on_environment()) {
    const double top = delay.tau() * opt.K;
    levels.clear();
    for (std::size_t q = 0; q < opt.n_levels; ++q)
      levels.push_back(opt.n_levels == 1 ? 0.0 : top * static_cast<double>(q) / static_cast<double>(opt.n_levels - 1));
  }
  Tracker nonneg("beta_nonnegative", 0.0, false), sup("beta_sup", kernel.R2, true);
  Tracker int0("beta_integral", kernel.R0, true), int1("beta_w11", kernel.R1, true);
  Tracker lip0("beta_integral_lipschitz", kernel.R0 * kernel.modulation_lipschitz, true);
  Tracker lip1("beta_w11_lipschitz", kernel.R1 * kernel.modulation_lipschitz, true);

  std::vector<double> col(nx);
  for (double sj : ss) {
    const double sigma = delay.node(static_cast<std::size_t>(sj));
    for (double yk : ys) {
      const double y = grid.node(static_cast<std::size_t>(yk));
      double prev_i0 = 0.0, prev_i1 = 0.0, prev_level = 0.0;
      for (std::size_t q = 0; q < levels.size(); ++q) {
        const double sn = levels[q];
        for (std::size_t i = 0; i < nx; ++i) {
          const double x = grid.node(i);
          col[i] = kernel.depends_on_environment() ? kernel(sigma, x, y, sn) : kernel(sigma, x, y);
          nonneg.add(col[i], x, sigma);
          sup.add(col[i], x, sigma);
        }
        const double i0 = quad::trapezoid(col, h);
        // int |beta_x| of the piecewise-linear interpolant
        double variation = 0.0;
        for (std::size_t i = 0; i + 1 < nx; ++i) variation += std::abs(col[i + 1] - col[i]);
        const double i1 = i0 + variation;
        int0.add(i0, y, sigma);
        int1.add(i1, y, sigma);
        if (q > 0) {
          const double d = sn - prev_level;
          lip0.add(std::abs(i0 - prev_i0) / d, y, sigma);
          lip1.add(std::abs(i1 - prev_i1) / d, y, sigma);
        }
        prev_i0 = i0;
        prev_i1 = i1;
        prev_level = sn;
      }
    }
  }
  const auto rel = [&](double declared) { return opt.quadrature_tol * std::max(std::abs(declared), 1e-300); };
  AssumptionReport rep;
  rep.conditions.push_back(nonneg.finish(0.0));
  rep.conditions.push_back(sup.finish(1e-12 * std::abs(kernel.R2)));
  rep.conditions.push_back(int0.finish(rel(kernel.R0)));
  rep.conditions.push_back(int1.finish(rel(kernel.R1)));
  if (kernel.depends_on_environment()) {
    rep.conditions.push_back(lip0.finish(rel(kernel.R0 * kernel.modulation_lipschitz)));
    rep.conditions.push_back(lip1.finish(rel(kernel.R1 * kernel.modulation_lipschitz)));
  }
  return rep;
}

}  // namespace sizepop
