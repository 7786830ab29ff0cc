#pragma once

#include <span>

#include "sizepop/coefficients.hpp"
#include "sizepop/grid.hpp"
#include "sizepop/operators.hpp"
#include "sizepop/record.hpp"

namespace sizepop {

/// Terms of the discrete mass balance of one step, mass measured as dx * sum_i n_i.
struct StepBalance {
  double mass_before = 0.0;
  double mass_after = 0.0;
  double recruitment = 0.0;  // dt * dx * sum Recr_i
  double mortality = 0.0;    // dt * dx * sum mu_i n_i
  double outflow = 0.0;      // dt * F_{m+1/2}
  /// |mass_after - mass_before - (recruitment - mortality - outflow)| relative to the largest term.
  double residual = 0.0;
};

/// Explicit first-order upwind step bound to one model and grid pair.
class UpwindStepper {
 public:
  UpwindStepper(const Model& model, SizeGrid grid, DelayGrid delay, double dt);

  /// `env` is N[current]; `recruit` the integrated recruitment of the history anchored at the
  /// current time.
  DensityField step(const DensityField& current, const SizeProfile& env, const SizeProfile& recruit,
                    StepBalance* balance = nullptr) const;

  const RecruitmentOperator& recruitment() const { return rop_; }
  const EnvironmentOperator& environment() const { return rop_.environment(); }
  double dt() const { return dt_; }

 private:
  ModelCoefficients coeffs_;
  SizeGrid grid_;
  double dt_;
  RecruitmentOperator rop_;
};

/// n_i <- n_i - dt/dx (F_{i+1/2} - F_{i-1/2}) - dt mu_i n_i + dt Recr_i with F_{-1/2} = 0.
/// `history` must be anchored at the current time (its newest slice equals `current`).
DensityField upwind_step(const DensityField& current, const HistoryBuffer& history, const Model& model, double dt,
                         StepBalance* balance = nullptr);

/// Time march with step equal to the delay spacing, rotating the history ring each step.
SolutionRecord solve_upwind(const HistoryBuffer& initial, const Model& model, double horizon);

}  // namespace sizepop
