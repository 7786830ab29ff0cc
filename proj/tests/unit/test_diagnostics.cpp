#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "sizepop/characteristics.hpp"
#include "sizepop/diagnostics.hpp"
#include "sizepop/errors.hpp"
#include "sizepop/operators.hpp"
#include "sizepop/upwind.hpp"

using namespace sizepop;
using namespace sizepop::testing;

namespace {

const double kMu = 0.5;

SolutionRecord zero_run() {
  RunConfig c = load_config(config_path("desk_renewal.ini"));
  return solve_characteristics(HistoryBuffer::constant(DelayGrid(1.0, 20), DensityField(SizeGrid(10.0, 100))),
                               c.model, 2.0);
}

SolutionRecord decay_run(double mu_c = kMu) {
  return solve_characteristics(gaussian_history(SizeGrid(15.0, 750), DelayGrid(1.0, 100)), transport_model(1.0, mu_c),
                               1.0);
}

/// Record whose every level holds the same field u.
SolutionRecord constant_record(const DensityField& u, const DelayGrid& d, std::size_t steps) {
  SolutionRecord rec(HistoryBuffer::constant(d, u), steps, "forced");
  auto shared = std::make_shared<const DensityField>(u);
  for (std::size_t k = 1; k <= steps; ++k) rec.set_level(static_cast<std::ptrdiff_t>(k), shared);
  rec.fill_rings();
  return rec;
}

struct Desk {
  RunConfig config;
  HistoryBuffer initial;
  SolutionRecord record;
};

Desk desk_run() {
  RunConfig c = load_config(config_path("desk_renewal.ini"));
  auto h = make_initial_history(c.initial, c.grid, c.delay);
  auto rec = solve_characteristics(h, c.model, 2.0);
  return {c, h, rec};
}

}  // namespace

TEST_CASE("every check passes on the zero run") {
  auto rec = zero_run();
  auto model = load_config(config_path("desk_renewal.ini")).model;
  const double r_bar = model.recruitment.r_bar();

  auto pos = check_positivity(rec);
  CHECK(pos.pass);
  for (const auto& p : pos.points) CHECK(p.margin == 0.0);
  CHECK(check_L1_bound(rec, r_bar).pass);
  CHECK(check_history_bound(rec, r_bar).pass);
  CHECK(check_sup_bound(rec, model.coefficients, r_bar).pass);
  CHECK(check_gradient_bound(rec, model.coefficients, r_bar, model.environment).pass);
  CHECK(check_history_derivative_bound(rec, model.coefficients, r_bar, model.environment).pass);
  CHECK(check_history_identity(rec).pass);
}

TEST_CASE("positivity on the decay case and on an injected negative field") {
  auto rec = decay_run();
  CHECK(check_positivity(rec).pass);

  const std::ptrdiff_t bad = 40;
  std::vector<double> v(rec.level(bad).values().begin(), rec.level(bad).values().end());
  for (double& x : v) x = -x;
  rec.set_level(bad, std::make_shared<const DensityField>(rec.grid(), std::move(v)));
  auto r = check_positivity(rec);
  CHECK_FALSE(r.pass);
  for (std::ptrdiff_t k = 0; k <= rec.last_level(); ++k) CHECK((r.points[static_cast<std::size_t>(k)].margin < 0.0) == (k == bad));
}

TEST_CASE("mass bound is an equality without recruitment or mortality") {
  auto rec = solve_characteristics(gaussian_history(SizeGrid(15.0, 750), DelayGrid(1.0, 100)),
                                   transport_model(1.0, 0.0), 1.0);
  // equality up to the quadrature of the sampled profiles
  auto r = check_L1_bound(rec, 0.0);
  const double m0 = norm(rec.level(0), NormKind::X);
  for (const auto& p : r.points) {
    CHECK(p.bound == m0);
    CHECK(std::abs(p.observed - p.bound) <= 1e-6 * p.bound);
  }
}

TEST_CASE("mass and history bounds on the desk case") {
  auto d = desk_run();
  const double r_bar = d.config.model.recruitment.r_bar();
  const double tau = d.config.delay.tau();
  auto n = initial_norms(d.record);
  CHECK(n.history_e == doctest::Approx(norm(d.initial, NormKind::E)).epsilon(1e-14));
  CHECK(n.initial_x == doctest::Approx(norm(d.initial.newest(), NormKind::X)).epsilon(1e-14));

  auto l1 = check_L1_bound(d.record, r_bar);
  CHECK(l1.pass);
  CHECK(l1.strict);
  CHECK(l1.points.front().bound == doctest::Approx(r_bar * tau * n.history_e + n.initial_x).epsilon(1e-14));
  for (std::size_t k = 0; k < l1.points.size(); ++k) {
    const double t = l1.points[k].t;
    CHECK(l1.points[k].bound ==
          doctest::Approx((r_bar * tau * n.history_e + n.initial_x) * std::exp(r_bar * tau * t)).epsilon(1e-13));
    if (k > 0) CHECK(l1.points[k].bound >= l1.points[k - 1].bound);
  }

  auto hist = check_history_bound(d.record, r_bar);
  CHECK(hist.pass);
  CHECK(hist.strict);
  bool before = false, after = false;
  for (const auto& p : hist.points) (p.t < tau ? before : after) = true;
  CHECK(before);
  CHECK(after);
  CHECK(hist.points.front().bound == doctest::Approx(n.history_e + tau * (r_bar * tau * n.history_e + n.initial_x)));
}

TEST_CASE("history bound on a forced constant field") {
  SizeGrid g(10.0, 200);
  DelayGrid d(1.0, 20);
  auto u = DensityField::sample(g, [](double x) { return gaussian(x, 4.0, 1.0); });
  auto rec = constant_record(u, d, 40);
  auto r = check_history_bound(rec, 0.0);
  CHECK(r.pass);
  const double expected = d.tau() * norm(u, NormKind::X);
  for (const auto& p : r.points) CHECK(p.observed == doctest::Approx(expected).epsilon(1e-14));

  auto coeffs = transport_model(1.0, 0.0).coefficients;
  auto deriv = check_history_derivative_bound(rec, coeffs, 0.0, EnvironmentKernel::constant(0.0));
  CHECK(deriv.pass);
  for (const auto& p : deriv.points) CHECK(p.observed <= 1e-14 * norm(u, NormKind::X));
}

TEST_CASE("sup bound reduces to initial data on the decay case") {
  auto rec = decay_run();
  auto coeffs = transport_model(1.0, kMu).coefficients;
  CHECK(estimate_lambda0(rec, coeffs) == 0.0);
  auto r = check_sup_bound(rec, coeffs, 0.0);
  CHECK(r.pass);
  CHECK(r.branch.rfind("g1", 0) == 0);
  auto n = initial_norms(rec);
  for (const auto& p : r.points) CHECK(p.bound == doctest::Approx(2.0 * n.initial_sup + n.initial_x).epsilon(1e-14));
  for (std::size_t k = 1; k < r.points.size(); ++k) CHECK(r.points[k].observed <= r.points[k - 1].observed);
}

TEST_CASE("sup bound branch selection and printed formulas") {
  CHECK(sup_branch(1.0, 1.0, -1.0) == SupBranch::g2);
  CHECK(sup_branch(2.0, 0.5, -1.0) == SupBranch::g2);
  CHECK(sup_branch(1.0, 1.0, -0.5) == SupBranch::g1);
  CHECK(sup_branch(0.0, 1.0, 0.0) == SupBranch::g1);

  InitialNorms n;
  n.history_e = 0.7;
  n.initial_x = 1.1;
  n.initial_sup = 0.4;
  const double R = 1.5, tau = 1.0, t = 0.8;
  // g1 with lambda0 = -0.5
  {
    const double l0 = -0.5;
    const double a = (R * tau * n.history_e + n.initial_sup) * (std::exp(-l0 * t) + 1.0);
    const double b = (R * tau * n.history_e + n.initial_x) * std::exp(R * tau * t) * (1.0 - l0 / (R * tau + l0));
    CHECK(sup_bound_value(SupBranch::g1, t, R, tau, l0, n) == doctest::Approx(a + b).epsilon(1e-14));
  }
  // g2 with lambda0 = -R tau
  {
    const double l0 = -R * tau;
    const double a = (R * tau * n.history_e + n.initial_sup) * (std::exp(-l0 * t) + 1.0);
    const double b = (R * tau * n.history_e + n.initial_x) * (std::exp(R * tau * t) - l0 * t * std::exp(-l0 * t));
    CHECK(sup_bound_value(SupBranch::g2, t, R, tau, l0, n) == doctest::Approx(a + b).epsilon(1e-14));
  }

  auto rec = decay_run(0.0);
  auto r = check_sup_bound(rec, transport_model(1.0, 0.0).coefficients, 1.0, -1.0);
  CHECK(r.branch.rfind("g2", 0) == 0);
  CHECK(r.pass);
}

TEST_CASE("gradient norm is transported exactly in the decay case") {
  auto rec = decay_run();
  auto coeffs = transport_model(1.0, kMu).coefficients;
  auto r = check_gradient_bound(rec, coeffs, 0.0, EnvironmentKernel::constant(0.0));
  CHECK(r.pass);
  CHECK(r.informative);
  // int |g'| of a unit Gaussian is twice its peak
  const double initial = 2.0 / std::sqrt(2.0 * M_PI);
  CHECK(r.points.front().observed == doctest::Approx(initial).epsilon(1e-4));
  CHECK(r.points.back().observed == doctest::Approx(initial * std::exp(-kMu * 1.0)).epsilon(1e-4));
}

TEST_CASE("history identity holds on solver records and catches a tampered ring") {
  auto d = desk_run();
  auto id = check_history_identity(d.record);
  CHECK(id.pass);
  CHECK(id.levels_checked == static_cast<std::size_t>(d.record.last_level()) + 1);
  CHECK(id.spot_checks == 100);

  auto up = solve_upwind(d.initial, d.config.model, 1.0);
  CHECK(check_history_identity(up).pass);

  auto rec = decay_run();
  const std::ptrdiff_t k = 30;
  const HistoryBuffer& ring = rec.ring_at(k);
  std::vector<FieldPtr> slices;
  for (std::size_t j = 0; j < ring.slice_count(); ++j) slices.push_back(ring.slice_ptr(j));
  std::vector<double> v(ring.slice(3).values().begin(), ring.slice(3).values().end());
  v[400] += 1e-13;
  slices[3] = std::make_shared<const DensityField>(rec.grid(), std::move(v));
  rec.set_ring(k, HistoryBuffer(ring.delay(), std::move(slices), ring.anchor_time()));
  CHECK_FALSE(check_history_identity(rec).pass);
}

TEST_CASE("continuous dependence ratio is constant for pure transport") {
  SizeGrid g(15.0, 750);
  DelayGrid d(1.0, 100);
  auto model = transport_model(1.0, 0.0);
  auto base = gaussian_history(g, d);
  auto bump = DensityField::sample(g, [](double x) { return gaussian(x, 2.0, 0.5); });
  auto rep = check_continuous_dependence(base, bump, [&](const HistoryBuffer& h) {
    return solve_characteristics(h, model, 1.0);
  });
  CHECK(rep.pass);
  CHECK(rep.max_spread == doctest::Approx(1.0).epsilon(1e-9));
  const double tau = d.tau();
  for (const auto& row : rep.ratios)
    for (double r : row) CHECK(r == doctest::Approx(1.0 / (1.0 + tau)).epsilon(1e-6));
}

TEST_CASE("continuous dependence requires a real perturbation") {
  SizeGrid g(10.0, 100);
  DelayGrid d(1.0, 10);
  auto model = transport_model(1.0, 0.0);
  auto base = gaussian_history(g, d);
  auto run = [&](const HistoryBuffer& h) { return solve_characteristics(h, model, 0.5); };
  auto bump = DensityField::sample(g, [](double x) { return gaussian(x, 2.0, 0.5); });
  CHECK_THROWS_AS(check_continuous_dependence(base, DensityField(g), run), DomainError);
  CHECK_THROWS_AS(check_continuous_dependence(base, bump, run, {0.1, 0.0}), DomainError);
  CHECK_THROWS_AS(check_continuous_dependence(base, bump, run, {}), DomainError);
}
