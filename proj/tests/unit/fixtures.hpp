#pragma once

#include <cmath>
#include <string>

#include "sizepop/coefficients.hpp"
#include "sizepop/config.hpp"
#include "sizepop/grid.hpp"
#include "sizepop/initial.hpp"

namespace sizepop::testing {

inline std::string config_path(const std::string& name) { return std::string(SIZEPOP_CONFIG_DIR) + "/" + name; }

/// gamma = g, mu = mu_c, no recruitment, no environment.
inline Model transport_model(double g, double mu_c, double K = 1.0) {
  Model m;
  m.coefficients = make_coefficients(growth::constant(g), mortality::constant(mu_c), K);
  m.environment = EnvironmentKernel::constant(0.0);
  m.recruitment = RecruitmentKernel::zero();
  return m;
}

inline double gaussian(double x, double c, double w) {
  return std::exp(-(x - c) * (x - c) / (2.0 * w * w)) / (w * std::sqrt(2.0 * M_PI));
}

/// Constant-in-sigma history with n0 = N(center, width) on the grids.
inline HistoryBuffer gaussian_history(const SizeGrid& grid, const DelayGrid& delay, double center = 5.0,
                                      double width = 1.0) {
  return HistoryBuffer::constant(delay, DensityField::sample(grid, [&](double x) { return gaussian(x, center, width); }));
}

/// Relative discrete L1 difference with trapezoid weights.
inline double relative_l1(const DensityField& a, const DensityField& b) {
  double num = 0.0, den = 0.0;
  const double h = a.grid().dx();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double w = (i == 0 || i + 1 == a.size()) ? 0.5 * h : h;
    num += w * std::abs(a[i] - b[i]);
    den += w * std::abs(b[i]);
  }
  return num / den;
}

}  // namespace sizepop::testing
