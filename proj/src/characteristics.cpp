#include "sizepop/characteristics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include "sizepop/errors.hpp"
#include "sizepop/operators.hpp"
#include "sizepop/quadrature.hpp"

namespace sizepop {

namespace {

constexpr double kExitTolerance = 1e-10;

struct State {
  double x;
  double jac;
};

double speed(const ModelCoefficients& c, const EnvironmentField& env, double t, double x) {
  const double xc = std::max(x, 0.0);
  double n = 0.0, s = 0.0;
  env.sample(t, xc, n, s);
  return c.gamma(xc, n);
}

void rates(const ModelCoefficients& c, const EnvironmentField& env, double t, double x, double& v, double& d) {
  const double xc = std::max(x, 0.0);
  double n = 0.0, s = 0.0;
  env.sample(t, xc, n, s);
  v = c.gamma(xc, n);
  d = c.growth_dx(xc, n) + c.growth_dN(xc, n) * s;
}

template <bool WithJacobian>
State rk4(const ModelCoefficients& c, const EnvironmentField& env, double t, State y, double h) {
  if constexpr (WithJacobian) {
    double v1, d1, v2, d2, v3, d3, v4, d4;
    rates(c, env, t, y.x, v1, d1);
    rates(c, env, t + 0.5 * h, y.x + 0.5 * h * v1, v2, d2);
    rates(c, env, t + 0.5 * h, y.x + 0.5 * h * v2, v3, d3);
    rates(c, env, t + h, y.x + h * v3, v4, d4);
    return {y.x + h / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4), y.jac + h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)};
  } else {
    const double v1 = speed(c, env, t, y.x);
    const double v2 = speed(c, env, t + 0.5 * h, y.x + 0.5 * h * v1);
    const double v3 = speed(c, env, t + 0.5 * h, y.x + 0.5 * h * v2);
    const double v4 = speed(c, env, t + h, y.x + h * v3);
    return {y.x + h / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4), y.jac};
  }
}

/// Length hh in (0, h] of a backward step from (t, y) that lands on x = 0.
template <bool WithJacobian>
double exit_step(const ModelCoefficients& c, const EnvironmentField& env, double t, State y, double h, double x_scale,
                 State& landing) {
  double lo = 0.0, hi = h;
  landing = rk4<WithJacobian>(c, env, t, y, -hi);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const State s = rk4<WithJacobian>(c, env, t, y, -mid);
    if (std::abs(s.x) <= kExitTolerance * x_scale) {
      landing = s;
      return mid;
    }
    if (s.x > 0.0) {
      lo = mid;
    } else {
      hi = mid;
      landing = s;
    }
    if (hi - lo <= 1e-16 * std::max(1.0, std::abs(t))) break;
  }
  return hi;
}

}  // namespace

RecordEnvironment::RecordEnvironment(SizeGrid grid, double t0, double dt, std::ptrdiff_t first_level,
                                     std::size_t count)
    : grid_(grid), t0_(t0), dt_(dt), first_(first_level), value_(count), slope_(count) {
  if (!(dt > 0.0) || count == 0) throw DomainError("environment record: dt > 0 and at least one level required");
}

RecordEnvironment::RecordEnvironment(const SolutionRecord& record)
    : RecordEnvironment(record.grid(), record.start_time(), record.dt(), record.first_level(),
                        record.delay().size() + record.steps()) {
  for (std::ptrdiff_t k = record.first_level(); k <= static_cast<std::ptrdiff_t>(record.steps()); ++k)
    if (record.has_environment(k)) set_level(k, record.environment(k));
}

void RecordEnvironment::set_level(std::ptrdiff_t k, const SizeProfile& profile) {
  const std::ptrdiff_t i = k - first_;
  if (i < 0 || static_cast<std::size_t>(i) >= value_.size()) throw DomainError("environment record: level out of range");
  if (!(profile.grid() == grid_)) throw DomainError("environment record: profile grid differs");
  value_[static_cast<std::size_t>(i)].assign(profile.values().begin(), profile.values().end());
  slope_[static_cast<std::size_t>(i)] = quad::derivative(profile.values(), grid_.dx());
}

void RecordEnvironment::sample_level(std::ptrdiff_t k, double x, double& value, double& slope) const {
  const auto& v = value_[static_cast<std::size_t>(k - first_)];
  const auto& s = slope_[static_cast<std::size_t>(k - first_)];
  if (v.empty()) throw SequencingError(fmt::format("environment record: level {} missing", k));
  const auto b = quad::bracket(grid_, x);
  value = (1.0 - b.w) * v[b.i] + b.w * v[b.i + 1];
  slope = (1.0 - b.w) * s[b.i] + b.w * s[b.i + 1];
}

void RecordEnvironment::sample(double t, double x, double& value, double& slope) const {
  const double pos = (t - t0_) / dt_ - static_cast<double>(first_);
  const auto last = static_cast<std::ptrdiff_t>(value_.size()) - 1;
  std::ptrdiff_t l = static_cast<std::ptrdiff_t>(std::floor(pos));
  double theta = pos - static_cast<double>(l);
  if (l < 0) {
    l = 0;
    theta = 0.0;
  }
  if (l >= last) {
    l = last;
    theta = 0.0;
  }
  sample_level(first_ + l, x, value, slope);
  if (theta > 0.0) {
    double v1 = 0.0, s1 = 0.0;
    sample_level(first_ + l + 1, x, v1, s1);
    value += theta * (v1 - value);
    slope += theta * (s1 - slope);
  }
}

CharacteristicPath trace_characteristic(double t0, double x0, const EnvironmentField& env,
                                        const ModelCoefficients& coeffs, Direction direction,
                                        const TraceOptions& options) {
  if (!(options.dt > 0.0)) throw DomainError("trace: dt must be positive");
  if (!(x0 >= 0.0)) throw DomainError("trace: seed size must be non-negative");
  const bool back = direction == Direction::backward;
  if (back ? options.t_end > t0 : options.t_end < t0) throw DomainError("trace: t_end lies on the wrong side of t0");
  const double x_scale = options.x_max > 0.0 ? options.x_max : 1.0;

  CharacteristicPath path;
  path.t0 = t0;
  path.x0 = x0;
  path.times.push_back(t0);
  path.positions.push_back(x0);
  path.jacobian_log.push_back(0.0);
  if (back && x0 == 0.0 && t0 > options.t_end) {
    path.exit_time = t0;
    return path;
  }

  const double span = std::abs(options.t_end - t0);
  const auto steps = static_cast<std::size_t>(std::ceil(span / options.dt - 1e-9));
  State y{x0, 0.0};
  double t = t0;
  for (std::size_t s = 1; s <= steps; ++s) {
    const double t_next = s == steps ? options.t_end : (back ? t0 - s * options.dt : t0 + s * options.dt);
    const double h = std::abs(t_next - t);
    State next = rk4<true>(coeffs, env, t, y, back ? -h : h);
    if (back && (next.x < 0.0 || (next.x == 0.0 && s < steps))) {
      State landing{};
      const double hh = exit_step<true>(coeffs, env, t, y, h, x_scale, landing);
      path.exit_time = t - hh;
      path.times.push_back(t - hh);
      path.positions.push_back(std::max(landing.x, 0.0));
      path.jacobian_log.push_back(landing.jac);
      return path;
    }
    if (!back && options.x_max > 0.0 && next.x > options.x_max)
      throw TruncationError(fmt::format("characteristic from ({:.6g}, {:.6g}) leaves [0, {:.6g}] at t = {:.6g}", t0, x0,
                                        options.x_max, t_next));
    y = next;
    t = t_next;
    path.times.push_back(t);
    path.positions.push_back(y.x);
    path.jacobian_log.push_back(y.jac);
  }
  return path;
}

CharacteristicPath trace_characteristic(double t0, double x0, const SolutionRecord& record,
                                        const ModelCoefficients& coeffs, Direction direction) {
  RecordEnvironment env(record);
  TraceOptions opt;
  opt.dt = record.dt();
  opt.x_max = record.grid().x_max();
  opt.t_end = direction == Direction::backward ? record.start_time() : record.time(record.last_level());
  return trace_characteristic(t0, x0, env, coeffs, direction, opt);
}

std::optional<double> entry_time(double t, double x, const EnvironmentField& env, const ModelCoefficients& coeffs,
                                 double dt, double x_max, double t_start) {
  if (!(x >= 0.0)) throw DomainError("entry_time: x must be non-negative");
  TraceOptions opt;
  opt.dt = dt;
  opt.t_end = t_start;
  opt.x_max = x_max;
  return trace_characteristic(t, x, env, coeffs, Direction::backward, opt).exit_time;
}

std::optional<double> entry_time(double t, double x, const SolutionRecord& record, const ModelCoefficients& coeffs) {
  RecordEnvironment env(record);
  return entry_time(t, x, env, coeffs, record.dt(), record.grid().x_max(), record.start_time());
}

namespace {

/// D gamma + mu at level k and size x.
double decay_rate(const ModelCoefficients& c, const RecordEnvironment& env, std::ptrdiff_t k, double x) {
  double n = 0.0, s = 0.0;
  env.sample_level(k, x, n, s);
  return c.growth_dx(x, n) + c.growth_dN(x, n) * s + c.mu(x, n);
}

double decay_rate_at(const ModelCoefficients& c, const EnvironmentField& env, double t, double x) {
  double n = 0.0, s = 0.0;
  env.sample(t, x, n, s);
  return c.growth_dx(x, n) + c.growth_dN(x, n) * s + c.mu(x, n);
}

/// Representation formula at (t_k, x): integrate along the backward characteristic to t_0 or to
/// its entry time at x = 0.
double represent(const SolutionRecord& record, const RecordEnvironment& env, const ModelCoefficients& c,
                 std::ptrdiff_t k, double x) {
  if (x == 0.0) return 0.0;
  const double dt = record.dt();
  const double x_scale = record.grid().x_max();
  const SizeGrid& grid = record.grid();

  double lam_prev = decay_rate(c, env, k, x);
  double rec_prev = quad::interpolate(record.recruitment(k).values(), grid, x);
  double big_lam = 0.0;
  double acc = 0.0;
  State y{x, 0.0};
  for (std::ptrdiff_t l = k - 1; l >= 0; --l) {
    const double t_hi = record.time(l + 1);
    const State next = rk4<false>(c, env, t_hi, y, -dt);
    if (next.x < 0.0 || (next.x == 0.0 && l > 0)) {
      State landing{};
      const double hh = exit_step<false>(c, env, t_hi, y, dt, x_scale, landing);
      const double eta = t_hi - hh;
      const double w = hh / dt;
      const double lam_eta = decay_rate_at(c, env, eta, 0.0);
      const double rec_eta =
          (1.0 - w) * record.recruitment(l + 1)[0] + w * record.recruitment(l)[0];
      const double lam_at_eta = big_lam + 0.5 * hh * (lam_eta + lam_prev);
      acc += 0.5 * hh * (std::exp(-lam_at_eta) * rec_eta + std::exp(-big_lam) * rec_prev);
      return acc;
    }
    y = next;
    const double lam = decay_rate(c, env, l, y.x);
    const double rec = quad::interpolate(record.recruitment(l).values(), grid, y.x);
    const double big_next = big_lam + 0.5 * dt * (lam + lam_prev);
    acc += 0.5 * dt * (std::exp(-big_next) * rec + std::exp(-big_lam) * rec_prev);
    big_lam = big_next;
    lam_prev = lam;
    rec_prev = rec;
  }
  const double seed = quad::interpolate(record.level(0).values(), grid, y.x);
  return acc + seed * std::exp(-big_lam);
}

SizeProfile recruitment_at(const SolutionRecord& record, const RecruitmentOperator& op, std::ptrdiff_t k) {
  const HistoryBuffer h = record.history_at(k);
  if (!op.kernel().depends_on_environment()) return op.apply(h, {});
  std::vector<const SizeProfile*> env;
  const auto p = static_cast<std::ptrdiff_t>(record.delay().intervals());
  for (std::ptrdiff_t j = 0; j <= p; ++j) env.push_back(&record.environment(k - p + j));
  return op.apply(h, env);
}

void refresh_level(SolutionRecord& record, RecordEnvironment& env, const EnvironmentOperator& eop, std::ptrdiff_t k) {
  SizeProfile e = eop.apply(record.level(k));
  env.set_level(k, e);
  record.set_environment(k, std::move(e));
}

}  // namespace

std::vector<FieldPtr> picard_step(const SolutionRecord& record, const RecordEnvironment& env, const Model& model,
                                  std::ptrdiff_t first, std::ptrdiff_t last) {
  if (first < 1 || last < first || last > static_cast<std::ptrdiff_t>(record.steps()))
    throw DomainError("picard_step: slab levels out of range");
  if (last - first + 1 > static_cast<std::ptrdiff_t>(record.delay().intervals()))
    throw DomainError("picard_step: slab wider than the delay");
  const SizeGrid& grid = record.grid();
  const std::size_t nx = grid.size();
  std::vector<FieldPtr> out;
  for (std::ptrdiff_t k = first; k <= last; ++k) {
    std::vector<double> values(nx, 0.0);
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, nx), [&](const tbb::blocked_range<std::size_t>& r) {
      for (std::size_t i = r.begin(); i != r.end(); ++i)
        values[i] = represent(record, env, model.coefficients, k, grid.node(i));
    });
    for (std::size_t i = 0; i < nx; ++i)
      if (!std::isfinite(values[i]))
        throw NumericalError(fmt::format("characteristics: non-finite density at level {}, x = {:.6g}", k, grid.node(i)),
                             static_cast<std::size_t>(k));
    out.push_back(std::make_shared<const DensityField>(grid, std::move(values)));
  }
  return out;
}

SolutionRecord solve_characteristics(const HistoryBuffer& initial, const Model& model, double horizon,
                                     const CharacteristicsOptions& options) {
  if (!initial.complete()) throw SequencingError("characteristics: initial history is incomplete");
  const DelayGrid& delay = initial.delay();
  const double dt = delay.dsigma();
  if (!(horizon > 0.0)) throw DomainError("characteristics: horizon must be positive");
  const double steps_real = horizon / dt;
  const auto steps = static_cast<std::size_t>(std::llround(steps_real));
  if (steps == 0 || std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * steps_real)
    throw DomainError("characteristics: horizon must be a whole number of time steps");
  const std::size_t p = delay.intervals();
  if (steps % p != 0) throw DomainError("characteristics: horizon must be a whole number of delays");

  SolutionRecord record(initial, steps, "characteristics");
  const SizeGrid grid = initial.size_grid();
  RecruitmentOperator rop(model.recruitment, model.environment, grid, delay);
  const EnvironmentOperator& eop = rop.environment();
  RecordEnvironment env(grid, record.start_time(), dt, record.first_level(), delay.size() + steps);
  const double K = model.coefficients.bounds.K;

  for (std::ptrdiff_t k = record.first_level(); k <= 0; ++k) refresh_level(record, env, eop, k);
  record.set_recruitment(0, recruitment_at(record, rop, 0));

  const std::size_t slabs = steps / p;
  for (std::size_t s = 0; s < slabs; ++s) {
    const auto a = static_cast<std::ptrdiff_t>(s * p);
    const std::ptrdiff_t first = a + 1;
    const auto last = static_cast<std::ptrdiff_t>(a + static_cast<std::ptrdiff_t>(p));
    for (std::ptrdiff_t k = first; k <= last; ++k) {
      record.set_level(k, record.level_ptr(a));
      refresh_level(record, env, eop, k);
    }
    for (std::ptrdiff_t k = first; k <= last; ++k) record.set_recruitment(k, recruitment_at(record, rop, k));

    SlabReport report;
    report.first_level = static_cast<std::size_t>(first);
    report.last_level = static_cast<std::size_t>(last);
    for (;;) {
      auto next = picard_step(record, env, model, first, last);
      double residual = 0.0;
      for (std::ptrdiff_t k = first; k <= last; ++k) {
        const auto& fresh = *next[static_cast<std::size_t>(k - first)];
        const auto& old = record.level(k);
        std::vector<double> diff(grid.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = fresh[i] - old[i];
        residual = std::max(residual, quad::trapezoid_abs(diff, grid.dx()));
      }
      for (std::ptrdiff_t k = first; k <= last; ++k) {
        record.set_level(k, next[static_cast<std::size_t>(k - first)]);
        refresh_level(record, env, eop, k);
      }
      for (std::ptrdiff_t k = first; k <= last; ++k) record.set_recruitment(k, recruitment_at(record, rop, k));
      report.residuals.push_back(residual);
      ++report.iterations;
      if (residual <= options.tol) break;
      if (report.iterations >= options.max_iter)
        throw ConvergenceError(fmt::format("characteristics: slab {} did not converge in {} iterations "
                                           "(last residual {:.3e}, tolerance {:.1e})",
                                           s, report.iterations, residual, options.tol),
                               s, residual);
    }
    record.slabs.push_back(std::move(report));
    for (std::ptrdiff_t k = first; k <= last; ++k) {
      record.boundary_ratio = std::max(record.boundary_ratio, guard_truncation(record.level(k), k));
      if (exceeds_cap(record.environment(k), K)) record.cap_exceeded_levels.push_back(k);
    }
  }
  record.fill_rings();
  return record;
}

}  // namespace sizepop
