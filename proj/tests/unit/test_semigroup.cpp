#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "sizepop/errors.hpp"
#include "sizepop/semigroup.hpp"

using namespace sizepop;
using namespace sizepop::testing;

namespace {

const SizeGrid kGrid(40.0, 4000);
const DelayGrid kDelay(1.0, 20);

double sup_history_error(const ProductElement& u, const std::function<double(double, double)>& exact) {
  double err = 0.0;
  for (std::size_t j = 0; j < u.delay().size(); ++j)
    for (std::size_t i = 0; i < u.grid().size(); ++i)
      err = std::max(err, std::abs(u.history(j, i) - exact(u.delay().node(j), u.grid().node(i))));
  return err;
}

double sup_field_error(const ProductElement& u, const std::function<double(double)>& exact) {
  double err = 0.0;
  for (std::size_t i = 0; i < u.grid().size(); ++i) err = std::max(err, std::abs(u.field(i) - exact(u.grid().node(i))));
  return err;
}

ProductElement zero_history_exp_field() {
  return ProductElement::sample(kGrid, kDelay, [](double, double) { return 0.0; }, [](double x) { return std::exp(-x); });
}

}  // namespace

TEST_CASE("S maps zero to zero") {
  ProductElement zero(kGrid, kDelay);
  auto s = apply_S(zero);
  CHECK(norm_x(s) == 0.0);
  auto inv = invert_S(zero);
  CHECK(norm_x(inv) == 0.0);
}

TEST_CASE("S of a closed-form smooth element") {
  auto u = ProductElement::sample(
      kGrid, kDelay, [](double s, double x) { return std::exp(s) * x * std::exp(-x); },
      [](double x) { return x * std::exp(-x); });
  REQUIRE(u.in_smooth_space());
  auto s = apply_S(u);
  // u' + u = e^{-x}; -d/dsigma u_tilde + u_tilde = 0; central-difference error is O(h^2)
  CHECK(sup_field_error(s, [](double x) { return std::exp(-x); }) <= 1e-4);
  CHECK(sup_history_error(s, [](double, double) { return 0.0; }) <= 1e-3);
}

TEST_CASE("S rejects elements outside the smooth space") {
  auto bad = ProductElement::sample(kGrid, kDelay, [](double, double x) { return std::exp(-x); },
                                    [](double x) { return std::exp(-x); });
  CHECK_FALSE(bad.in_smooth_space());
  CHECK_THROWS_AS(apply_S(bad), DomainError);
}

TEST_CASE("inverse of S on a closed-form element") {
  auto u = invert_S(zero_history_exp_field());
  CHECK(u.in_smooth_space());
  CHECK(sup_field_error(u, [](double x) { return x * std::exp(-x); }) <= 1e-5);
  CHECK(sup_history_error(u, [](double s, double x) { return std::exp(s) * x * std::exp(-x); }) <= 1e-5);
}

TEST_CASE("inverse of S always lands in the smooth space") {
  for (int k = 1; k <= 4; ++k) {
    auto f = ProductElement::sample(
        SizeGrid(10.0, 100), DelayGrid(1.0, 10), [k](double s, double x) { return std::sin(k * x + s) + 0.5; },
        [k](double x) { return std::cos(k * x) * std::exp(-x); });
    CHECK(invert_S(f).in_smooth_space());
  }
}

TEST_CASE("closed-form resolvent for unit growth") {
  auto coeffs = make_coefficients(growth::constant(1.0), mortality::constant(0.0), 1.0);
  auto rho = EnvironmentKernel::constant(0.0);
  SizeGrid g(40.0, 4000);
  auto res = resolvent_A1(1.0, DensityField(g), zero_history_exp_field(), coeffs, rho);
  auto u = [](double x) { return std::exp(-x) - std::exp(-2.0 * x); };
  CHECK(sup_field_error(res.value, u) <= 1e-4);
  CHECK(sup_history_error(res.value, [&](double s, double x) { return std::exp(2.0 * s) * u(x); }) <= 1e-4);

  auto summary = closed_form_resolvent(0.01);
  CHECK(summary.sup_error_field <= 1e-4);
  CHECK(summary.sup_error_history <= 1e-4);
}

TEST_CASE("resolvent of zero and invalid lambda") {
  auto coeffs = make_coefficients(growth::constant(1.0), mortality::constant(0.0), 1.0);
  auto rho = EnvironmentKernel::constant(0.0);
  ProductElement zero(kGrid, kDelay);
  auto res = resolvent_A1(2.0, DensityField(kGrid), zero, coeffs, rho);
  CHECK(norm_x(res.value) == 0.0);
  CHECK_THROWS_AS(resolvent_A1(0.0, DensityField(kGrid), zero, coeffs, rho), DomainError);
  CHECK_THROWS_AS(resolvent_A1(-1.0, DensityField(kGrid), zero, coeffs, rho), DomainError);
}

TEST_CASE("resolvent contraction on a reduced battery") {
  RunConfig c = load_config(config_path("semigroup.ini"));
  BatterySettings s = c.semigroup;
  s.resolvent_draws = 32;
  auto out = contraction_battery(s, c.model.coefficients, c.model.environment);
  REQUIRE(out.size() == s.lambdas.size());
  for (const auto& row : out) {
    CAPTURE(row.lambda);
    CHECK(row.draws == 32);
    CHECK(row.violations == 0);
    CHECK(row.component_violations == 0);
    CHECK(row.min_margin >= 0.0);
  }
}

TEST_CASE("norm equivalence on a reduced battery") {
  BatterySettings s;
  s.norm_draws = 16;
  auto out = norm_equivalence_battery(s);
  CHECK(out.violations == 0);
  CHECK(out.lower_constant == doctest::Approx(1.0 / (2.0 * s.tau + 3.0)));
  CHECK(out.min_ratio >= out.lower_constant * (1.0 - s.norm_slack));
  CHECK(out.max_ratio <= 1.0 + s.norm_slack);
  CHECK(out.refined_slack < out.slack);
}

TEST_CASE("round trip and resolvent residual converge under refinement") {
  BatterySettings s;
  auto rt = round_trip_refinement(s);
  // second order in both spacings: the error drops about fourfold when they halve
  CHECK(rt.ratio >= 3.0);
  RunConfig c = load_config(config_path("semigroup.ini"));
  auto rr = resolvent_residual_refinement(s, c.model.coefficients, c.model.environment);
  CHECK(rr.ratio >= 1.7);
}
