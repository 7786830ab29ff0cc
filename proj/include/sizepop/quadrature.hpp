#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sizepop/grid.hpp"

/// Composite trapezoid quadrature, finite differences and linear interpolation on uniform grids.
namespace sizepop::quad {

/// Weights h*(1/2, 1, ..., 1, 1/2) for n nodes.
std::vector<double> trapezoid_weights(std::size_t n, double h);

double trapezoid(std::span<const double> f, double h);
double trapezoid_abs(std::span<const double> f, double h);

/// Second-order differences: central inside, three-point one-sided at the ends.
std::vector<double> derivative(std::span<const double> f, double h);

/// Linear interpolation of nodal values on `grid`; x is clamped into [0, x_max].
double interpolate(std::span<const double> f, const SizeGrid& grid, double x);

/// Interpolation weight pair for x: f(x) ~ (1-w) f[i] + w f[i+1].
struct Bracket {
  std::size_t i;
  double w;
};
Bracket bracket(const SizeGrid& grid, double x);

}  // namespace sizepop::quad
