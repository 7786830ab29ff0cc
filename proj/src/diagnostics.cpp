#include "sizepop/diagnostics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "sizepop/errors.hpp"
#include "sizepop/operators.hpp"
#include "sizepop/quadrature.hpp"
#include "sizepop/random.hpp"

namespace sizepop {

namespace {

constexpr double kTiny = 1e-300;

void finish(BoundReport& r) {
  r.pass = true;
  r.strict = true;
  r.min_margin = std::numeric_limits<double>::infinity();
  for (BoundPoint& p : r.points) {
    p.margin = p.bound - p.observed;
    r.min_margin = std::min(r.min_margin, p.margin);
    if (!(p.margin >= -kBoundTolerance * std::max(std::abs(p.bound), kTiny))) r.pass = false;
    if (!(p.margin > 0.0)) r.strict = false;
  }
  if (r.points.empty()) r.min_margin = 0.0;
  if (r.informative) r.pass = true;
}

// Time elapsed since the start of the run at level k.
double elapsed(const SolutionRecord& rec, std::ptrdiff_t k) { return rec.time(k) - rec.start_time(); }

// B(t) = (R tau ||n_hat||_E + ||n_hat_0||_X) e^{R tau t}.
double mass_growth(double t, double r_bar, double tau, double hist_e, double init_x) {
  return (r_bar * tau * hist_e + init_x) * std::exp(r_bar * tau * t);
}

double derivative_l1(const DensityField& n) {
  const auto d = quad::derivative(n.values(), n.grid().dx());
  return quad::trapezoid_abs(d, n.grid().dx());
}

// Gronwall chain of the gradient bound with the given initial norms.
struct GradientChain {
  double r_bar, tau, lambda0, c1, c2, g1, g2;
  InitialNorms norms;
  std::function<double(double)> f1;

  double B(double t) const { return mass_growth(t, r_bar, tau, norms.history_e, norms.initial_x); }
  double g(double t) const {
    const SupBranch first = sup_branch(r_bar, tau, lambda0);
    // g = g1 + g2; where g1 is undefined (lambda0 = -R tau) both terms use g2.
    const double a = sup_bound_value(first, t, r_bar, tau, lambda0, norms);
    const double b = sup_bound_value(SupBranch::g2, t, r_bar, tau, lambda0, norms);
    return a + b;
  }
  double f2(double t) const {
    return c2 * (norms.initial_sup * std::exp(-lambda0 * t) + g(t)) * (g2 * c1 * B(t) + g1);
  }
  double f(double t) const { return f1(t) + t * f2(t) * B(t); }

  /// f(t) + f2(t) int_0^t f(s) exp(int_s^t f2) ds on a uniform grid of `n` intervals.
  std::vector<double> bound(const std::vector<double>& times, std::size_t substeps) const {
    std::vector<double> out;
    out.reserve(times.size());
    if (times.empty()) return out;
    const double t_end = times.back();
    const std::size_t n = std::max<std::size_t>(1, (times.size() - 1) * substeps);
    const double h = t_end / static_cast<double>(n);
    std::vector<double> s(n + 1), fv(n + 1), f2v(n + 1), F2(n + 1, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      s[i] = h * static_cast<double>(i);
      fv[i] = f(s[i]);
      f2v[i] = f2(s[i]);
      if (i > 0) F2[i] = F2[i - 1] + 0.5 * h * (f2v[i] + f2v[i - 1]);
    }
    for (double t : times) {
      const auto i_t = static_cast<std::size_t>(std::llround(h > 0.0 ? t / h : 0.0));
      double integral = 0.0;
      for (std::size_t i = 1; i <= i_t; ++i) {
        const double a = fv[i - 1] * std::exp(F2[i_t] - F2[i - 1]);
        const double b = fv[i] * std::exp(F2[i_t] - F2[i]);
        integral += 0.5 * h * (a + b);
      }
      out.push_back(f(t) + f2(t) * integral);
    }
    return out;
  }
};

std::function<double(double)> default_f1(const ModelCoefficients& coeffs, double r_bar, double tau,
                                         const InitialNorms& n) {
  const CoefficientBounds b = coeffs.bounds;
  const double inv_lo = b.gamma_lo > 0.0 ? 1.0 / b.gamma_lo : 0.0;
  const double rate = b.gamma_d1 + b.mu_hi + b.mu_x_hi + r_bar * tau;
  return [=](double t) {
    const double B = mass_growth(t, r_bar, tau, n.history_e, n.initial_x);
    return (n.initial_y + r_bar * tau * (1.0 + inv_lo) * (n.history_e + (1.0 + t) * B)) * std::exp(rate * t);
  };
}

GradientChain make_chain(const SolutionRecord& record, const ModelCoefficients& coeffs, double r_bar,
                         const EnvironmentKernel& rho, const InitialNorms& norms, const GradientOptions& options,
                         BoundReport& report) {
  const EnvironmentConstants c = estimate_environment_constants(rho, record.grid(), &record);
  const double lambda0 = estimate_lambda0(record, coeffs);
  const double tau = record.delay().tau();
  GradientChain chain{r_bar, tau, lambda0, c.c1, c.c2, coeffs.bounds.gamma_d1, coeffs.bounds.gamma_d2, norms,
                      options.f1 ? options.f1 : default_f1(coeffs, r_bar, tau, norms)};
  report.parameters["c_prime"] = c.c1;
  report.parameters["c_double_prime"] = c.c2;
  report.parameters["lambda0"] = lambda0;
  report.parameters["R_bar"] = r_bar;
  report.branch = options.f1 ? "custom f1" : "default f1 surrogate";
  return chain;
}

std::vector<double> level_times(const SolutionRecord& record) {
  std::vector<double> t;
  for (std::ptrdiff_t k = 0; k <= record.last_level(); ++k) t.push_back(elapsed(record, k));
  return t;
}

}  // namespace

InitialNorms initial_norms(const SolutionRecord& record) {
  const HistoryBuffer h = record.history_at(0);
  const DensityField& n0 = record.level(0);
  InitialNorms r;
  r.history_e = norm(h, NormKind::E);
  r.initial_x = norm(n0, NormKind::X);
  r.initial_sup = norm(n0, NormKind::Sup);
  r.initial_y = norm(n0, NormKind::Y);
  r.history_sigma = sigma_derivative_norm(h);
  r.smooth_total = r.history_e + r.history_sigma + r.initial_y;
  return r;
}

BoundReport check_positivity(const SolutionRecord& record) {
  BoundReport r;
  r.name = "positivity";
  r.branch = "-min n >= -tol * peak";
  double peak = 0.0;
  for (std::ptrdiff_t k = 0; k <= record.last_level(); ++k) peak = std::max(peak, record.level(k).max_abs());
  const double tol = kPositivityTolerance * peak;
  r.parameters["peak"] = peak;
  r.parameters["tolerance"] = tol;
  for (std::ptrdiff_t k = 0; k <= record.last_level(); ++k)
    r.points.push_back({elapsed(record, k), 0.0 - record.level(k).min(), tol, 0.0});
  finish(r);
  // A zero margin means min == -tol; values of exactly zero are admissible.
  r.strict = r.pass;
  return r;
}

BoundReport check_L1_bound(const SolutionRecord& record, double r_bar) {
  BoundReport r;
  r.name = "L1";
  r.branch = "(R tau ||n_hat||_E + ||n_hat_0||_X) e^{R tau t}";
  const InitialNorms n = initial_norms(record);
  const double tau = record.delay().tau();
  r.parameters["R_bar"] = r_bar;
  r.parameters["history_E"] = n.history_e;
  r.parameters["initial_X"] = n.initial_x;
  for (std::ptrdiff_t k = 0; k <= record.last_level(); ++k) {
    const double t = elapsed(record, k);
    r.points.push_back({t, norm(record.level(k), NormKind::X), mass_growth(t, r_bar, tau, n.history_e, n.initial_x), 0.0});
  }
  finish(r);
  return r;
}

BoundReport check_history_bound(const SolutionRecord& record, double r_bar) {
  BoundReport r;
  r.name = "history_E";
  r.branch = "||n_hat||_E + (t + tau) B(t)";
  const InitialNorms n = initial_norms(record);
  const double tau = record.delay().tau();
  r.parameters["R_bar"] = r_bar;
  r.parameters["history_E"] = n.history_e;
  r.parameters["initial_X"] = n.initial_x;
  for (std::ptrdiff_t k = 0; k <= record.last_level(); ++k) {
    const double t = elapsed(record, k);
    const HistoryBuffer& ring = record.has_ring(k) ? record.ring_at(k) : record.history_at(k);
    const double bound = n.history_e + (t + tau) * mass_growth(t, r_bar, tau, n.history_e, n.initial_x);
    r.points.push_back({t, norm(ring, NormKind::E), bound, 0.0});
  }
  finish(r);
  return r;
}

double estimate_lambda0(const SolutionRecord& record, const ModelCoefficients& coeffs) {
  double lo = 0.0;
  const SizeGrid& g = record.grid();
  for (std::ptrdiff_t k = 0; k <= record.last_level(); ++k) {
    if (!record.has_environment(k)) continue;
    const SizeProfile& env = record.environment(k);
    for (std::size_t i = 0; i < g.size(); ++i) lo = std::min(lo, coeffs.growth_dx(g.node(i), env[i]));
  }
  if (coeffs.gamma_x_infimum) lo = std::min(lo, *coeffs.gamma_x_infimum);
  return lo;
}

SupBranch sup_branch(double r_bar, double tau, double lambda0) {
  const double scale = std::max(1.0, std::abs(r_bar * tau));
  if (lambda0 < 0.0 && std::abs(r_bar * tau + lambda0) <= 1e-12 * scale) return SupBranch::g2;
  return SupBranch::g1;
}

double sup_bound_value(SupBranch branch, double t, double r_bar, double tau, double lambda0, const InitialNorms& n) {
  const double a = (r_bar * tau * n.history_e + n.initial_sup) * (std::exp(-lambda0 * t) + 1.0);
  const double b = r_bar * tau * n.history_e + n.initial_x;
  if (branch == SupBranch::g2) return a + b * (std::exp(r_bar * tau * t) - lambda0 * t * std::exp(-lambda0 * t));
  const double ratio = lambda0 == 0.0 ? 0.0 : lambda0 / (r_bar * tau + lambda0);
  return a + b * std::exp(r_bar * tau * t) * (1.0 - ratio);
}

BoundReport check_sup_bound(const SolutionRecord& record, const ModelCoefficients& coeffs, double r_bar,
                            std::optional<double> lambda0) {
  BoundReport r;
  r.name = "sup";
  const double l0 = lambda0 ? *lambda0 : estimate_lambda0(record, coeffs);
  const double tau = record.delay().tau();
  const SupBranch branch = sup_branch(r_bar, tau, l0);
  r.branch = branch == SupBranch::g1 ? "g1 (as printed)" : "g2 (as printed)";
  const InitialNorms n = initial_norms(record);
  r.parameters["lambda0"] = l0;
  r.parameters["R_bar"] = r_bar;
  r.parameters["initial_sup"] = n.initial_sup;
  for (std::ptrdiff_t k = 0; k <= record.last_level(); ++k) {
    const double t = elapsed(record, k);
    r.points.push_back({t, norm(record.level(k), NormKind::Sup), sup_bound_value(branch, t, r_bar, tau, l0, n), 0.0});
  }
  finish(r);
  return r;
}

EnvironmentConstants estimate_environment_constants(const EnvironmentKernel& rho, const SizeGrid& grid,
                                                    const SolutionRecord* record) {
  EnvironmentConstants c;
  const std::size_t m = grid.cells();
  const std::size_t stride = std::max<std::size_t>(1, m / 64);
  for (std::size_t j = 0; j <= m; j += stride) {
    const double y = grid.node(j);
    double tv = 0.0;
    for (std::size_t i = 0; i < m; ++i) tv += std::abs(rho(grid.node(i + 1), y) - rho(grid.node(i), y));
    c.c1 = std::max(c.c1, tv);
  }

  const EnvironmentOperator op(rho, grid);
  auto probe = [&](const DensityField& n) {
    const double nx = norm(n, NormKind::X);
    const double ny = norm(n, NormKind::Y);
    if (!(nx > 0.0)) return;
    const SizeProfile N = op.apply(n);
    const auto Nx = quad::derivative(N.values(), grid.dx());
    const DensityField dN(grid, Nx);
    const double l1 = quad::trapezoid_abs(Nx, grid.dx());
    c.c1 = std::max(c.c1, l1 / nx);
    const double w11 = norm(dN, NormKind::Y);
    c.c2 = std::max(c.c2, std::max(w11, dN.max_abs()) / ny);
  };
  const double L = grid.x_max();
  for (double centre : {0.1, 0.25, 0.5, 0.75}) {
    for (double width : {0.02, 0.05, 0.15}) {
      probe(DensityField::sample(grid, [&](double x) {
        const double z = (x - centre * L) / (width * L);
        return std::exp(-0.5 * z * z);
      }));
    }
  }
  if (record) {
    for (std::ptrdiff_t k = 0; k <= record->last_level(); ++k) probe(record->level(k));
  }
  return c;
}

BoundReport check_gradient_bound(const SolutionRecord& record, const ModelCoefficients& coeffs, double r_bar,
                                 const EnvironmentKernel& rho, const GradientOptions& options) {
  BoundReport r;
  r.name = "gradient";
  r.informative = true;
  const InitialNorms n = initial_norms(record);
  const GradientChain chain = make_chain(record, coeffs, r_bar, rho, n, options, r);
  const std::vector<double> times = level_times(record);
  const std::vector<double> bound = chain.bound(times, options.substeps);
  for (std::size_t i = 0; i < times.size(); ++i)
    r.points.push_back({times[i], derivative_l1(record.level(static_cast<std::ptrdiff_t>(i))), bound[i], 0.0});
  finish(r);
  return r;
}

BoundReport check_history_derivative_bound(const SolutionRecord& record, const ModelCoefficients& coeffs,
                                           double r_bar, const EnvironmentKernel& rho, const GradientOptions& options) {
  BoundReport r;
  r.name = "history_derivative";
  r.informative = true;
  const InitialNorms n = initial_norms(record);
  InitialNorms y = n;
  y.history_e = y.initial_sup = y.initial_x = n.smooth_total;
  GradientOptions opts = options;
  if (!opts.f1) opts.f1 = default_f1(coeffs, r_bar, record.delay().tau(), y);
  const GradientChain chain = make_chain(record, coeffs, r_bar, rho, y, opts, r);
  r.branch = options.f1 ? "custom f1" : "default f1 surrogate";
  const std::vector<double> times = level_times(record);
  const std::vector<double> h1 = chain.bound(times, opts.substeps);
  const CoefficientBounds& b = coeffs.bounds;
  const double tau = record.delay().tau();
  r.parameters["U0_Y"] = n.smooth_total;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const double B = mass_growth(t, r_bar, tau, n.history_e, n.initial_x);
    const double bound = n.smooth_total + b.gamma_hi * t * h1[i] + (b.mu_hi + b.gamma_d1) * t * B +
                         r_bar * t * (n.history_e + (t + tau) * B);
    const auto k = static_cast<std::ptrdiff_t>(i);
    const HistoryBuffer& ring = record.has_ring(k) ? record.ring_at(k) : record.history_at(k);
    r.points.push_back({t, sigma_derivative_norm(ring), bound, 0.0});
  }
  finish(r);
  return r;
}

IdentityReport check_history_identity(const SolutionRecord& record, std::uint64_t seed, std::size_t spot) {
  IdentityReport r;
  const std::size_t p = record.delay().intervals();
  const std::ptrdiff_t last = record.last_level();
  auto fail = [&](std::string msg) {
    if (r.pass) r.detail = std::move(msg);
    r.pass = false;
  };
  for (std::ptrdiff_t k = 0; k <= last; ++k) {
    if (!record.has_ring(k)) {
      fail(fmt::format("no history snapshot at level {}", k));
      continue;
    }
    const HistoryBuffer& ring = record.ring_at(k);
    if (std::abs(ring.anchor_time() - record.time(k)) > 1e-12 * std::max(1.0, std::abs(record.time(k))))
      fail(fmt::format("snapshot at level {} anchored at {} instead of {}", k, ring.anchor_time(), record.time(k)));
    for (std::size_t j = 0; j <= p; ++j) {
      const std::ptrdiff_t level = k - static_cast<std::ptrdiff_t>(p) + static_cast<std::ptrdiff_t>(j);
      const FieldPtr& a = ring.slice_ptr(j);
      const FieldPtr& b = record.level_ptr(level);
      if (a != b && !(*a == *b)) fail(fmt::format("slice {} of the history at level {} differs from level {}", j, k, level));
    }
    ++r.levels_checked;
    if (k < last && record.has_ring(k + 1)) {
      const HistoryBuffer& next = record.ring_at(k + 1);
      for (std::size_t j = 0; j < p; ++j) {
        if (!(next.slice(j) == ring.slice(j + 1)))
          fail(fmt::format("history at level {} is not the shift of level {} (slice {})", k + 1, k, j));
      }
      ++r.shifted_checks;
    }
  }
  Rng rng(seed);
  const std::size_t m = record.grid().size();
  for (std::size_t s = 0; s < spot && last >= 0; ++s) {
    const auto k = static_cast<std::ptrdiff_t>(rng.next() % static_cast<std::uint64_t>(last + 1));
    const auto j = static_cast<std::size_t>(rng.next() % (p + 1));
    const auto i = static_cast<std::size_t>(rng.next() % m);
    if (!record.has_ring(k)) continue;
    const std::ptrdiff_t level = k - static_cast<std::ptrdiff_t>(p) + static_cast<std::ptrdiff_t>(j);
    const double a = record.ring_at(k).slice(j)[i];
    const double b = record.level(level)[i];
    if (std::bit_cast<std::uint64_t>(a) != std::bit_cast<std::uint64_t>(b))
      fail(fmt::format("spot check: n_{}({}, x_{}) = {} but n({}, x_{}) = {}", k, record.delay().node(j), i, a,
                       record.time(level), i, b));
    ++r.spot_checks;
  }
  return r;
}

DependenceReport check_continuous_dependence(const HistoryBuffer& base, const DensityField& bump, const Runner& run,
                                             std::vector<double> epsilons, double factor) {
  if (epsilons.empty()) throw DomainError("continuous dependence: no perturbation sizes");
  for (double e : epsilons)
    if (!(e > 0.0)) throw DomainError("continuous dependence: perturbation sizes must be positive");
  if (!(bump.grid() == base.size_grid())) throw DomainError("continuous dependence: bump grid differs from history grid");
  DependenceReport r;
  r.epsilons = epsilons;
  const SolutionRecord ref = run(base);
  for (std::ptrdiff_t k = 0; k <= ref.last_level(); ++k) r.times.push_back(ref.time(k) - ref.start_time());
  const DelayGrid& delay = base.delay();
  for (double eps : epsilons) {
    std::vector<FieldPtr> slices;
    for (std::size_t j = 0; j < delay.size(); ++j) {
      const DensityField& s = base.slice(j);
      std::vector<double> v(s.values().begin(), s.values().end());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += eps * bump[i];
      slices.push_back(std::make_shared<const DensityField>(s.grid(), std::move(v)));
    }
    const HistoryBuffer perturbed(delay, slices, base.anchor_time());
    const SolutionRecord other = run(perturbed);
    // Denominator ||n_hat - m_hat||_E + ||n_hat_0 - m_hat_0||_X.
    std::vector<FieldPtr> diff_slices;
    for (std::size_t j = 0; j < delay.size(); ++j) {
      std::vector<double> d(base.slice(j).size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = base.slice(j)[i] - perturbed.slice(j)[i];
      diff_slices.push_back(std::make_shared<const DensityField>(bump.grid(), std::move(d)));
    }
    const HistoryBuffer diff(delay, diff_slices, base.anchor_time());
    const double denom = norm(diff, NormKind::E) + norm(diff.newest(), NormKind::X);
    if (!(denom > 0.0)) throw DomainError("continuous dependence: perturbation has zero norm");
    std::vector<double> ratios;
    const std::ptrdiff_t last = std::min(ref.last_level(), other.last_level());
    for (std::ptrdiff_t k = 0; k <= last; ++k) {
      std::vector<double> d(ref.level(k).size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = ref.level(k)[i] - other.level(k)[i];
      ratios.push_back(norm(DensityField(bump.grid(), std::move(d)), NormKind::X) / denom);
    }
    r.ratios.push_back(std::move(ratios));
  }
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& row : r.ratios) {
      if (k >= row.size()) continue;
      lo = std::min(lo, row[k]);
      hi = std::max(hi, row[k]);
    }
    const double spread = hi == 0.0 ? 1.0 : (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity());
    r.spread.push_back(spread);
    r.max_spread = std::max(r.max_spread, spread);
    if (!(spread <= factor)) {
      if (r.pass) r.detail = fmt::format("ratios spread by {:.3g} at t = {}", spread, r.times[k]);
      r.pass = false;
    }
  }
  return r;
}

}  // namespace sizepop
