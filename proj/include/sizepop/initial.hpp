#pragma once

#include <string>

#include "sizepop/grid.hpp"

namespace sizepop {

/// Parametric initial history n_hat(sigma, x) = n0(x) * w(sigma).
struct InitialSpec {
  /// zero | gamma_bump | gaussian | csv
  std::string family = "zero";
  /// Total mass of n0 over [0, inf).
  double mass = 1.0;
  /// gamma_bump: n0 = mass x^shape exp(-x / scale) / (Gamma(shape + 1) scale^(shape + 1)).
  double shape = 6.0;
  double scale = 0.3;
  /// gaussian: n0 = mass exp(-(x - center)^2 / (2 width^2)) / (width sqrt(2 pi)).
  double center = 5.0;
  double width = 1.0;
  /// constant: w = 1; decaying: w = exp(rate * sigma).
  std::string time_profile = "constant";
  double rate = 0.0;
  /// csv: rows sigma,x,value covering every (delay node, size node) pair.
  std::string csv_path;
};

/// Largest mass fraction allowed beyond x_max at t = 0.
inline constexpr double kInitialTailFraction = 1e-12;

/// n0 evaluated at x (parametric families only).
double initial_density(const InitialSpec& spec, double x);

/// Mass of n0 beyond x_max relative to its total (parametric families; 0 for zero).
double initial_tail_fraction(const InitialSpec& spec, double x_max);

/// Sample the history on the grids, anchored at t = 0. Throws ConfigError on unknown families,
/// malformed CSV or a tail fraction at or above kInitialTailFraction.
HistoryBuffer make_initial_history(const InitialSpec& spec, const SizeGrid& grid, const DelayGrid& delay);

}  // namespace sizepop
