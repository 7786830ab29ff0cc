#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "sizepop/characteristics.hpp"
#include "sizepop/errors.hpp"
#include "sizepop/operators.hpp"
#include "sizepop/upwind.hpp"

using namespace sizepop;
using namespace sizepop::testing;

namespace {

/// gamma = 2 - 1 / (1 + N) with analytic partials.
ModelCoefficients saturating_growth() {
  ModelCoefficients c = make_coefficients(growth::constant(1.0), mortality::constant(0.0), 1.0);
  c.growth_family = "custom";
  c.gamma = [](double, double N) { return 2.0 - 1.0 / (1.0 + N); };
  c.gamma_x = [](double, double) { return 0.0; };
  c.gamma_N = [](double, double N) { return 1.0 / ((1.0 + N) * (1.0 + N)); };
  c.bounds.gamma_lo = 1.0;
  c.bounds.gamma_hi = 2.0;
  return c;
}

FrozenEnvironment exp_environment() {
  return FrozenEnvironment([](double x) { return std::exp(-x); }, [](double x) { return -std::exp(-x); });
}

/// Independent RK4 for dx/dt = g(x) from (t0, x0) to t1 with n steps.
template <class G>
double rk4(G&& g, double t0, double x0, double t1, int n) {
  const double h = (t1 - t0) / n;
  double x = x0;
  for (int s = 0; s < n; ++s) {
    const double k1 = g(x), k2 = g(x + 0.5 * h * k1), k3 = g(x + 0.5 * h * k2), k4 = g(x + h * k3);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

double gamma_frozen(double x) { return 2.0 - 1.0 / (1.0 + std::exp(-x)); }

struct DeskCase {
  RunConfig config;
  HistoryBuffer initial;
};

DeskCase desk(double horizon) {
  RunConfig c = load_config(config_path("desk_renewal.ini"));
  c.solver.horizon = horizon;
  return {c, make_initial_history(c.initial, c.grid, c.delay)};
}

}  // namespace

TEST_CASE("linear characteristics for unit growth") {
  auto c = make_coefficients(growth::constant(1.0), mortality::constant(0.0), 1.0);
  auto env = exp_environment();
  auto path = trace_characteristic(0.0, 0.0, env, c, Direction::forward, {.dt = 0.01, .t_end = 2.0, .x_max = 10.0});
  REQUIRE(path.times.size() == path.positions.size());
  for (std::size_t s = 0; s < path.times.size(); ++s) {
    CHECK(path.positions[s] == doctest::Approx(path.times[s]).epsilon(1e-13));
    CHECK(path.jacobian_log[s] == 0.0);
  }
}

TEST_CASE("frozen-environment path matches a hundredfold finer step") {
  auto c = saturating_growth();
  auto env = exp_environment();
  auto path = trace_characteristic(0.0, 0.5, env, c, Direction::forward, {.dt = 0.01, .t_end = 2.0, .x_max = 20.0});
  const double ref = rk4(gamma_frozen, 0.0, 0.5, 2.0, 20000);
  CHECK(std::abs(path.positions.back() - ref) <= 1e-8);
  for (std::size_t s = 1; s < path.positions.size(); ++s) CHECK(path.positions[s] > path.positions[s - 1]);
}

TEST_CASE("origin characteristic stays within the growth bounds") {
  auto c = saturating_growth();
  auto env = exp_environment();
  auto z = trace_characteristic(0.0, 0.0, env, c, Direction::forward, {.dt = 0.01, .t_end = 3.0, .x_max = 20.0});
  for (std::size_t s = 1; s < z.times.size(); ++s) {
    const double t = z.times[s];
    CHECK(z.positions[s] >= c.bounds.gamma_lo * t);
    CHECK(z.positions[s] <= c.bounds.gamma_hi * t);
  }
}

TEST_CASE("tracing is a semigroup") {
  auto c = saturating_growth();
  auto env = exp_environment();
  const TraceOptions to_t1{.dt = 0.01, .t_end = 0.7, .x_max = 20.0};
  auto first = trace_characteristic(0.0, 0.3, env, c, Direction::forward, to_t1);
  auto second = trace_characteristic(0.7, first.positions.back(), env, c, Direction::forward,
                                     {.dt = 0.01, .t_end = 1.9, .x_max = 20.0});
  auto direct = trace_characteristic(0.0, 0.3, env, c, Direction::forward, {.dt = 0.01, .t_end = 1.9, .x_max = 20.0});
  CHECK(second.positions.back() == doctest::Approx(direct.positions.back()).epsilon(1e-10));

  auto back = trace_characteristic(1.9, direct.positions.back(), env, c, Direction::backward,
                                   {.dt = 0.01, .t_end = 0.0, .x_max = 20.0});
  CHECK(back.positions.back() == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("jacobian factor equals the seed derivative of the flow") {
  ModelCoefficients c = make_coefficients(growth::constant(1.0), mortality::constant(0.0), 1.0);
  c.gamma = [](double x, double) { return 1.0 + 0.5 * std::exp(-x); };
  c.gamma_x = [](double x, double) { return -0.5 * std::exp(-x); };
  c.gamma_N = [](double, double) { return 0.0; };
  auto env = exp_environment();
  const double x0 = 0.4, delta = 1e-4;
  const TraceOptions opt{.dt = 0.01, .t_end = 1.5, .x_max = 20.0};
  auto mid = trace_characteristic(0.0, x0, env, c, Direction::forward, opt);
  auto hi = trace_characteristic(0.0, x0 + delta, env, c, Direction::forward, opt);
  auto lo = trace_characteristic(0.0, x0 - delta, env, c, Direction::forward, opt);
  const double fd = (hi.positions.back() - lo.positions.back()) / (2 * delta);
  CHECK(std::exp(mid.jacobian_log.back()) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("forward path leaving the box raises a truncation error") {
  auto c = make_coefficients(growth::constant(1.0), mortality::constant(0.0), 1.0);
  auto env = exp_environment();
  CHECK_THROWS_AS(
      trace_characteristic(0.0, 1.0, env, c, Direction::forward, {.dt = 0.01, .t_end = 5.0, .x_max = 3.0}),
      TruncationError);
}

TEST_CASE("entry times for unit growth") {
  auto c = make_coefficients(growth::constant(1.0), mortality::constant(0.0), 1.0);
  auto env = exp_environment();
  auto eta = entry_time(2.0, 0.5, env, c, 0.01, 10.0);
  REQUIRE(eta.has_value());
  // the landing is resolved to |x| <= 1e-10 x_max, i.e. 1e-9 in time at unit speed
  CHECK(std::abs(*eta - 1.5) <= 1e-9);
  CHECK_FALSE(entry_time(2.0, 3.0, env, c, 0.01, 10.0).has_value());
}

TEST_CASE("entry time for variable growth matches a bisected dense path") {
  auto c = saturating_growth();
  auto env = exp_environment();
  const double t = 2.0, x = 1.2;
  auto eta = entry_time(t, x, env, c, 0.01, 20.0);
  REQUIRE(eta.has_value());

  // oracle: the backward path from (t, x) reaches 0 at time s where the path position crosses zero
  auto position_at = [&](double s) { return rk4([](double y) { return -gamma_frozen(y); }, s, x, t, 4000); };
  double lo = 0.0, hi = t;
  REQUIRE(position_at(lo) < 0.0);
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (position_at(mid) < 0.0 ? lo : hi) = mid;
  }
  CHECK(std::abs(*eta - 0.5 * (lo + hi)) <= 1e-6);
}

TEST_CASE("zero data stays zero with one Picard iteration per slab") {
  SizeGrid g(10.0, 100);
  DelayGrid d(1.0, 20);
  RunConfig c = load_config(config_path("desk_renewal.ini"));
  auto rec = solve_characteristics(HistoryBuffer::constant(d, DensityField(g)), c.model, 2.0);
  for (std::ptrdiff_t k = 0; k <= rec.last_level(); ++k) CHECK(rec.level(k).max_abs() == 0.0);
  REQUIRE(rec.slabs.size() == 2);
  for (const auto& s : rec.slabs) CHECK(s.iterations == 1);
}

TEST_CASE("transport with decay is reproduced along characteristics") {
  const double mu_c = 0.5;
  SizeGrid g(15.0, 300);
  DelayGrid d(1.0, 100);
  auto model = transport_model(1.0, mu_c);
  auto h = gaussian_history(g, d);
  auto rec = solve_characteristics(h, model, 1.0);
  const double m0 = norm(h.newest(), NormKind::X);
  CHECK(norm(rec.level(rec.last_level()), NormKind::X) == doctest::Approx(m0 * std::exp(-mu_c)).epsilon(1e-3));

  for (std::ptrdiff_t k = 10; k <= rec.last_level(); k += 10) {
    const double t = rec.time(k);
    auto exact = DensityField::sample(g, [&](double x) { return x > t ? gaussian(x - t, 5.0, 1.0) * std::exp(-mu_c * t) : 0.0; });
    CHECK(relative_l1(rec.level(k), exact) <= 1e-3);
  }
}

TEST_CASE("desk renewal Picard iterates are non-negative and contract") {
  auto dc = desk(2.0);
  auto rec = solve_characteristics(dc.initial, dc.config.model, 2.0);
  for (std::ptrdiff_t k = 0; k <= rec.last_level(); ++k) CHECK(rec.level(k).min() >= 0.0);
  for (const auto& s : rec.slabs) {
    REQUIRE(s.residuals.size() >= 2);
    for (std::size_t i = 2; i < s.residuals.size(); ++i) CHECK(s.residuals[i] < s.residuals[i - 1]);
    CHECK(s.residuals.back() <= 1e-8);
  }
}

TEST_CASE("desk renewal fixed point matches a fourfold finer upwind run at one delay") {
  auto dc = desk(1.0);
  auto rec = solve_characteristics(dc.initial, dc.config.model, 1.0);

  const std::size_t factor = 4;
  SizeGrid fine_grid = dc.config.grid.refined(factor);
  DelayGrid fine_delay = dc.config.delay.refined(factor);
  auto fine = solve_upwind(make_initial_history(dc.config.initial, fine_grid, fine_delay), dc.config.model, 1.0);

  const DensityField& coarse = rec.level(rec.last_level());
  const DensityField& ref_fine = fine.level(fine.last_level());
  DensityField ref(coarse.grid());
  for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = ref_fine[i * factor];
  CHECK(relative_l1(coarse, ref) <= 0.02);
}
