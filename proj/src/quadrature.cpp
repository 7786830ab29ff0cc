#include "sizepop/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace sizepop::quad {

std::vector<double> trapezoid_weights(std::size_t n, double h) {
  std::vector<double> w(n, h);
  if (n == 0) return w;
  if (n == 1) {
    w[0] = 0.0;
    return w;
  }
  w.front() = 0.5 * h;
  w.back() = 0.5 * h;
  return w;
}

double trapezoid(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  if (n < 2) return 0.0;
  double s = 0.5 * (f[0] + f[n - 1]);
  for (std::size_t i = 1; i + 1 < n; ++i) s += f[i];
  return s * h;
}

double trapezoid_abs(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  if (n < 2) return 0.0;
  double s = 0.5 * (std::abs(f[0]) + std::abs(f[n - 1]));
  for (std::size_t i = 1; i + 1 < n; ++i) s += std::abs(f[i]);
  return s * h;
}

std::vector<double> derivative(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  if (n == 2) {
    d[0] = d[1] = (f[1] - f[0]) / h;
    return d;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
  d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
  return d;
}

Bracket bracket(const SizeGrid& grid, double x) {
  if (!(x > 0.0)) return {0, 0.0};
  if (x >= grid.x_max()) return {grid.cells() - 1, 1.0};
  const double s = x / grid.dx();
  auto i = static_cast<std::size_t>(s);
  if (i >= grid.cells()) i = grid.cells() - 1;
  return {i, s - static_cast<double>(i)};
}

double interpolate(std::span<const double> f, const SizeGrid& grid, double x) {
  const Bracket b = bracket(grid, x);
  return (1.0 - b.w) * f[b.i] + b.w * f[b.i + 1];
}

}  // namespace sizepop::quad
