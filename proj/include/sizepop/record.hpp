#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sizepop/grid.hpp"

namespace sizepop {

/// Picard statistics of one slab of the characteristics solver.
struct SlabReport {
  std::size_t first_level = 0;
  std::size_t last_level = 0;
  std::size_t iterations = 0;
  std::vector<double> residuals;
};

/// Time levels t_k = t_0 + k dt for k = -p, ..., K; levels k <= 0 hold the initial history.
///
/// Level spacing equals the delay spacing, so the history anchored at any level is a window of
/// stored levels. Fields are shared references: history views and ring snapshots point at the same
/// objects as the levels.
class SolutionRecord {
 public:
  SolutionRecord(const HistoryBuffer& initial, std::size_t steps, std::string solver);

  const std::string& solver() const { return solver_; }
  const DelayGrid& delay() const { return delay_; }
  const SizeGrid& grid() const { return grid_; }
  double dt() const { return delay_.dsigma(); }
  double start_time() const { return t0_; }
  std::size_t steps() const { return steps_; }
  std::ptrdiff_t first_level() const { return -static_cast<std::ptrdiff_t>(delay_.intervals()); }
  double time(std::ptrdiff_t k) const { return t0_ + static_cast<double>(k) * dt(); }
  double horizon() const { return time(static_cast<std::ptrdiff_t>(steps_)); }

  bool has_level(std::ptrdiff_t k) const;
  const DensityField& level(std::ptrdiff_t k) const;
  const FieldPtr& level_ptr(std::ptrdiff_t k) const;
  void set_level(std::ptrdiff_t k, FieldPtr field);
  /// Highest level k >= 0 with a stored field.
  std::ptrdiff_t last_level() const;

  bool has_environment(std::ptrdiff_t k) const;
  const SizeProfile& environment(std::ptrdiff_t k) const;
  void set_environment(std::ptrdiff_t k, SizeProfile profile);

  /// Integrated recruitment at level k >= 0 (the source term of the step or representation).
  bool has_recruitment(std::ptrdiff_t k) const;
  const SizeProfile& recruitment(std::ptrdiff_t k) const;
  void set_recruitment(std::ptrdiff_t k, SizeProfile profile);

  /// History segment anchored at t_k, assembled from levels k-p, ..., k.
  HistoryBuffer history_at(std::ptrdiff_t k) const;

  /// Snapshot of the solver's rolling buffer when it was anchored at t_k (k >= 0).
  const HistoryBuffer& ring_at(std::ptrdiff_t k) const;
  void set_ring(std::ptrdiff_t k, HistoryBuffer ring);
  bool has_ring(std::ptrdiff_t k) const;
  /// Fill missing ring snapshots from history_at.
  void fill_rings();

  std::vector<SlabReport> slabs;
  /// Per-step relative residual of the discrete mass balance (upwind only).
  std::vector<double> mass_balance_residuals;
  /// Levels whose environment exceeded the cap K.
  std::vector<std::ptrdiff_t> cap_exceeded_levels;
  /// max_k n(t_k, x_max) / ||n(t_k)||_X over the computed levels.
  double boundary_ratio = 0.0;

 private:
  std::size_t index(std::ptrdiff_t k) const;

  std::string solver_;
  DelayGrid delay_;
  SizeGrid grid_;
  double t0_;
  std::size_t steps_;
  std::vector<FieldPtr> levels_;
  std::vector<std::optional<SizeProfile>> env_;
  std::vector<std::optional<SizeProfile>> recruit_;
  std::vector<std::optional<HistoryBuffer>> rings_;
};

/// Density at x_max allowed per unit total mass before a run is aborted.
inline constexpr double kBoundaryDensityRatio = 1e-6;

/// Ratio n(x_max) / ||n||_X (0 for a zero field); throws TruncationError above the limit.
double guard_truncation(const DensityField& n, std::ptrdiff_t level);

}  // namespace sizepop
