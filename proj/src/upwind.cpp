#include "sizepop/upwind.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sizepop/errors.hpp"

namespace sizepop {

UpwindStepper::UpwindStepper(const Model& model, SizeGrid grid, DelayGrid delay, double dt)
    : coeffs_(model.coefficients), grid_(grid), dt_(dt), rop_(model.recruitment, model.environment, grid, delay) {
  if (!(dt > 0.0)) throw DomainError("upwind: dt must be positive");
  if (dt * model.coefficients.bounds.gamma_hi > grid.dx())
    throw CflError(fmt::format("upwind: CFL violated, dt * gamma_hi = {:.6g} > dx = {:.6g}",
                               dt * model.coefficients.bounds.gamma_hi, grid.dx()));
}

DensityField UpwindStepper::step(const DensityField& current, const SizeProfile& env, const SizeProfile& recruit,
                                 StepBalance* balance) const {
  const std::size_t n = grid_.size();
  const double dx = grid_.dx();
  const double ratio = dt_ / dx;
  std::vector<double> flux(n);
  double fastest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xf = (static_cast<double>(i) + 0.5) * dx;
    const double nf = i + 1 < n ? 0.5 * (env[i] + env[i + 1]) : env[i];
    const double g = coeffs_.gamma(xf, nf);
    fastest = std::max(fastest, g);
    flux[i] = g * current[i];
  }
  if (fastest * dt_ > dx * (1.0 + 1e-12))
    throw CflError(fmt::format("upwind: CFL violated, dt * max gamma = {:.6g} > dx = {:.6g}", fastest * dt_, dx));

  std::vector<double> next(n);
  double mort = 0.0, rec = 0.0, before = 0.0, after = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double inflow = i == 0 ? 0.0 : flux[i - 1];
    const double loss = coeffs_.mu(grid_.node(i), env[i]) * current[i];
    next[i] = current[i] - ratio * (flux[i] - inflow) - dt_ * loss + dt_ * recruit[i];
    mort += loss;
    rec += recruit[i];
    before += current[i];
    after += next[i];
  }
  if (balance) {
    balance->mass_before = dx * before;
    balance->mass_after = dx * after;
    balance->recruitment = dt_ * dx * rec;
    balance->mortality = dt_ * dx * mort;
    balance->outflow = dt_ * flux[n - 1];
    const double scale = std::max({std::abs(balance->mass_before), std::abs(balance->mass_after),
                                   std::abs(balance->recruitment), std::abs(balance->mortality),
                                   std::abs(balance->outflow)});
    const double gap = balance->mass_after - balance->mass_before -
                       (balance->recruitment - balance->mortality - balance->outflow);
    balance->residual = scale > 0.0 ? std::abs(gap) / scale : 0.0;
  }
  for (double v : next)
    if (!std::isfinite(v)) throw NumericalError("upwind: non-finite density", 0);
  return DensityField(grid_, std::move(next));
}

DensityField upwind_step(const DensityField& current, const HistoryBuffer& history, const Model& model, double dt,
                         StepBalance* balance) {
  if (!history.complete()) throw SequencingError("upwind: incomplete history");
  if (!(history.newest() == current)) throw SequencingError("upwind: history is not anchored at the current field");
  UpwindStepper stepper(model, current.grid(), history.delay(), dt);
  const SizeProfile env = stepper.environment().apply(current);
  const SizeProfile rec = stepper.recruitment().apply(history);
  return stepper.step(current, env, rec, balance);
}

SolutionRecord solve_upwind(const HistoryBuffer& initial, const Model& model, double horizon) {
  if (!initial.complete()) throw SequencingError("upwind: initial history is incomplete");
  const DelayGrid& delay = initial.delay();
  const double dt = delay.dsigma();
  if (!(horizon > 0.0)) throw DomainError("upwind: horizon must be positive");
  const double steps_real = horizon / dt;
  const auto steps = static_cast<std::size_t>(std::llround(steps_real));
  if (steps == 0 || std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * steps_real)
    throw DomainError("upwind: horizon must be a whole number of time steps");

  SolutionRecord record(initial, steps, "upwind");
  const SizeGrid grid = initial.size_grid();
  const UpwindStepper stepper(model, grid, delay, dt);
  const auto& eop = stepper.environment();
  const auto& rop = stepper.recruitment();
  const double K = model.coefficients.bounds.K;
  const auto p = static_cast<std::ptrdiff_t>(delay.intervals());
  for (std::ptrdiff_t k = record.first_level(); k <= 0; ++k) record.set_environment(k, eop.apply(record.level(k)));

  HistoryBuffer ring = initial;
  record.set_ring(0, ring);
  std::vector<const SizeProfile*> slice_env(delay.size());
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(steps); ++k) {
    for (std::ptrdiff_t j = 0; j <= p; ++j) slice_env[static_cast<std::size_t>(j)] = &record.environment(k - p + j);
    SizeProfile rec = rop.kernel().depends_on_environment() ? rop.apply(ring, slice_env) : rop.apply(ring, {});
    StepBalance bal;
    DensityField next = [&] {
      try {
        return stepper.step(ring.newest(), record.environment(k), rec, &bal);
      } catch (const NumericalError&) {
        throw NumericalError(fmt::format("upwind: non-finite density at step {}", k), static_cast<std::size_t>(k));
      }
    }();
    record.set_recruitment(k, std::move(rec));
    record.mass_balance_residuals.push_back(bal.residual);
    auto ptr = std::make_shared<const DensityField>(std::move(next));
    record.set_level(k + 1, ptr);
    record.set_environment(k + 1, eop.apply(*ptr));
    if (exceeds_cap(record.environment(k + 1), K)) record.cap_exceeded_levels.push_back(k + 1);
    record.boundary_ratio = std::max(record.boundary_ratio, guard_truncation(*ptr, k + 1));
    ring.advance(ptr, record.time(k + 1));
    record.set_ring(k + 1, ring);
  }
  // Recruitment at the final level, for diagnostics that integrate the source over [0, T].
  for (std::ptrdiff_t j = 0; j <= p; ++j)
    slice_env[static_cast<std::size_t>(j)] = &record.environment(static_cast<std::ptrdiff_t>(steps) - p + j);
  record.set_recruitment(static_cast<std::ptrdiff_t>(steps),
                         rop.kernel().depends_on_environment() ? rop.apply(ring, slice_env) : rop.apply(ring, {}));
  return record;
}

}  // namespace sizepop
