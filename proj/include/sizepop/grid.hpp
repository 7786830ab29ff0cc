#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace sizepop {

/// Uniform nodes 0 = x_0 < ... < x_m = x_max on the truncated size axis.
class SizeGrid {
 public:
  SizeGrid(double x_max, std::size_t cells);

  double x_max() const { return x_max_; }
  std::size_t cells() const { return cells_; }
  std::size_t size() const { return cells_ + 1; }
  double dx() const { return dx_; }
  double node(std::size_t i) const { return i == cells_ ? x_max_ : static_cast<double>(i) * dx_; }
  std::vector<double> nodes() const;

  /// Same grid refined by an integer factor.
  SizeGrid refined(std::size_t factor) const;

  friend bool operator==(const SizeGrid&, const SizeGrid&) = default;

 private:
  double x_max_;
  std::size_t cells_;
  double dx_;
};

/// Uniform nodes -tau = sigma_0 < ... < sigma_p = 0 on the delay axis.
class DelayGrid {
 public:
  DelayGrid(double tau, std::size_t intervals);

  double tau() const { return tau_; }
  std::size_t intervals() const { return intervals_; }
  std::size_t size() const { return intervals_ + 1; }
  double dsigma() const { return dsigma_; }
  double node(std::size_t j) const;
  std::vector<double> nodes() const;

  DelayGrid refined(std::size_t factor) const;

  friend bool operator==(const DelayGrid&, const DelayGrid&) = default;

 private:
  double tau_;
  std::size_t intervals_;
  double dsigma_;
};

/// One time slice n(t, .) sampled on the size grid. Values are finite; the sign is not constrained.
class DensityField {
 public:
  explicit DensityField(SizeGrid grid);
  DensityField(SizeGrid grid, std::vector<double> values);

  template <class F>
  static DensityField sample(const SizeGrid& grid, F&& f) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.node(i));
    return DensityField(grid, std::move(v));
  }

  const SizeGrid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double min() const;
  double max_abs() const;

  friend bool operator==(const DensityField&, const DensityField&) = default;

 private:
  SizeGrid grid_;
  std::vector<double> values_;
};

/// Node-wise profiles that are not densities (environment N, recruitment) share the layout.
using SizeProfile = DensityField;

using FieldPtr = std::shared_ptr<const DensityField>;

/// The segment n_t(sigma) = n(t + sigma), sigma in [-tau, 0]; slice j lives at anchor_time + sigma_j.
///
/// Slices are shared references, so a buffer rotated by a solver and the solver's stored time
/// levels point at the same objects.
class HistoryBuffer {
 public:
  HistoryBuffer(DelayGrid delay, std::vector<FieldPtr> slices, double anchor_time);

  /// Buffer holding the same field at every delay node.
  static HistoryBuffer constant(DelayGrid delay, const DensityField& field, double anchor_time = 0.0);

  const DelayGrid& delay() const { return delay_; }
  double anchor_time() const { return anchor_time_; }
  double time_of(std::size_t j) const { return anchor_time_ + delay_.node(j); }

  /// True when all p+1 slices are present and share one size grid.
  bool complete() const;
  std::size_t slice_count() const { return slices_.size(); }
  const DensityField& slice(std::size_t j) const;
  const FieldPtr& slice_ptr(std::size_t j) const { return slices_.at(j); }
  const DensityField& newest() const { return slice(slices_.size() - 1); }
  const SizeGrid& size_grid() const { return newest().grid(); }

  /// Drop the oldest slice, append `next` as the newest and re-anchor at `new_anchor`.
  void advance(FieldPtr next, double new_anchor);

 private:
  DelayGrid delay_;
  std::vector<FieldPtr> slices_;
  double anchor_time_;
};

}  // namespace sizepop
