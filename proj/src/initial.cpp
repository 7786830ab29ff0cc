#include "sizepop/initial.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "sizepop/errors.hpp"

namespace sizepop {

namespace {

double time_weight(const InitialSpec& spec, double sigma) {
  if (spec.time_profile == "constant") return 1.0;
  if (spec.time_profile == "decaying") return std::exp(spec.rate * sigma);
  throw ConfigError("initial: unknown time_profile '" + spec.time_profile + "' (expected constant|decaying)");
}

void validate(const InitialSpec& s) {
  if (s.family == "zero" || s.family == "csv") return;
  if (!(s.mass >= 0.0) || !std::isfinite(s.mass)) throw ConfigError("initial: mass must be finite and non-negative");
  if (s.family == "gamma_bump") {
    if (!(s.shape >= 0.0) || !(s.scale > 0.0)) throw ConfigError("initial gamma_bump: shape >= 0 and scale > 0 required");
    return;
  }
  if (s.family == "gaussian") {
    if (!(s.width > 0.0) || !(s.center >= 0.0)) throw ConfigError("initial gaussian: width > 0 and center >= 0 required");
    return;
  }
  throw ConfigError("initial: unknown family '" + s.family + "' (expected zero|gamma_bump|gaussian|csv)");
}

HistoryBuffer read_csv(const InitialSpec& spec, const SizeGrid& grid, const DelayGrid& delay) {
  std::ifstream in(spec.csv_path);
  if (!in) throw ConfigError("initial: cannot open history CSV '" + spec.csv_path + "'");
  std::vector<std::vector<double>> cells(delay.size(), std::vector<double>(grid.size(), NAN));
  std::vector<std::vector<bool>> seen(delay.size(), std::vector<bool>(grid.size(), false));
  std::string line;
  std::size_t row = 0;
  const double tol_s = 1e-9 * delay.tau();
  const double tol_x = 1e-9 * grid.x_max();
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream fields(line);
    double s = 0.0, x = 0.0, v = 0.0;
    if (!(fields >> s >> x >> v)) {
      if (row == 1) continue;  // header
      throw ConfigError(fmt::format("initial CSV row {}: expected sigma,x,value", row));
    }
    const double js = (s + delay.tau()) / delay.dsigma();
    const double ix = x / grid.dx();
    const auto j = static_cast<long>(std::llround(js));
    const auto i = static_cast<long>(std::llround(ix));
    if (j < 0 || j > static_cast<long>(delay.intervals()) || i < 0 || i > static_cast<long>(grid.cells()) ||
        std::abs(delay.node(static_cast<std::size_t>(j)) - s) > tol_s ||
        std::abs(grid.node(static_cast<std::size_t>(i)) - x) > tol_x)
      throw ConfigError(fmt::format("initial CSV row {}: ({}, {}) is not a grid node", row, s, x));
    if (!std::isfinite(v) || v < 0.0) throw ConfigError(fmt::format("initial CSV row {}: value must be finite and >= 0", row));
    if (seen[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])
      throw ConfigError(fmt::format("initial CSV row {}: duplicate node", row));
    seen[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = true;
    cells[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = v;
  }
  std::vector<FieldPtr> slices;
  for (std::size_t j = 0; j < delay.size(); ++j) {
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (!seen[j][i])
        throw ConfigError(fmt::format("initial CSV: missing node sigma = {}, x = {}", delay.node(j), grid.node(i)));
    slices.push_back(std::make_shared<const DensityField>(grid, std::move(cells[j])));
  }
  return HistoryBuffer(delay, std::move(slices), 0.0);
}

}  // namespace

double initial_density(const InitialSpec& s, double x) {
  validate(s);
  if (s.family == "zero") return 0.0;
  if (s.family == "gamma_bump") {
    if (x <= 0.0) return s.shape == 0.0 && x == 0.0 ? s.mass / s.scale : 0.0;
    const double log_d = s.shape * std::log(x) - x / s.scale - std::lgamma(s.shape + 1.0) -
                         (s.shape + 1.0) * std::log(s.scale);
    return s.mass * std::exp(log_d);
  }
  if (s.family == "gaussian") {
    const double z = (x - s.center) / s.width;
    return s.mass * std::exp(-0.5 * z * z) / (s.width * std::sqrt(2.0 * M_PI));
  }
  throw ConfigError("initial: family '" + s.family + "' has no closed-form density");
}

double initial_tail_fraction(const InitialSpec& s, double x_max) {
  validate(s);
  if (s.family == "zero" || s.mass == 0.0) return 0.0;
  if (s.family == "gamma_bump") return boost::math::gamma_q(s.shape + 1.0, x_max / s.scale);
  if (s.family == "gaussian") {
    const double beyond = 0.5 * std::erfc((x_max - s.center) / (s.width * std::sqrt(2.0)));
    const double inside = 0.5 * std::erfc(-s.center / (s.width * std::sqrt(2.0)));
    return beyond / inside;
  }
  throw ConfigError("initial: tail fraction needs a parametric family");
}

HistoryBuffer make_initial_history(const InitialSpec& spec, const SizeGrid& grid, const DelayGrid& delay) {
  validate(spec);
  if (spec.family == "csv") return read_csv(spec, grid, delay);
  const double tail = initial_tail_fraction(spec, grid.x_max());
  if (tail >= kInitialTailFraction)
    throw ConfigError(fmt::format("initial: mass fraction {:.3e} lies beyond x_max = {} (limit {:.0e}); enlarge x_max",
                                  tail, grid.x_max(), kInitialTailFraction));
  const DensityField base = DensityField::sample(grid, [&](double x) { return initial_density(spec, x); });
  std::vector<FieldPtr> slices;
  for (std::size_t j = 0; j < delay.size(); ++j) {
    const double w = time_weight(spec, delay.node(j));
    if (w == 1.0) {
      slices.push_back(std::make_shared<const DensityField>(base));
      continue;
    }
    std::vector<double> v(base.values().begin(), base.values().end());
    for (double& e : v) e *= w;
    slices.push_back(std::make_shared<const DensityField>(grid, std::move(v)));
  }
  return HistoryBuffer(delay, std::move(slices), 0.0);
}

}  // namespace sizepop
