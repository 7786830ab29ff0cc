#include <doctest.h>

#include <cmath>
#include <random>

#include "sizepop/coefficients.hpp"
#include "sizepop/errors.hpp"
#include "sizepop/operators.hpp"

using namespace sizepop;

namespace {

/// Random positive, smooth slice: a sum of two Gaussian bumps with random centers and weights.
DensityField random_slice(const SizeGrid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(0.5, 0.7 * g.x_max()), w(0.3, 1.5), a(0.0, 2.0);
  const double c1 = c(rng), c2 = c(rng), w1 = w(rng), w2 = w(rng), a1 = a(rng), a2 = a(rng);
  return DensityField::sample(g, [&](double x) {
    return a1 * std::exp(-(x - c1) * (x - c1) / (2 * w1 * w1)) + a2 * std::exp(-(x - c2) * (x - c2) / (2 * w2 * w2));
  });
}

HistoryBuffer random_history(const SizeGrid& g, const DelayGrid& d, std::mt19937_64& rng) {
  std::vector<FieldPtr> slices;
  for (std::size_t j = 0; j < d.size(); ++j) slices.push_back(std::make_shared<const DensityField>(random_slice(g, rng)));
  return HistoryBuffer(d, std::move(slices), 0.0);
}

HistoryBuffer difference(const HistoryBuffer& a, const HistoryBuffer& b) {
  std::vector<FieldPtr> slices;
  for (std::size_t j = 0; j < a.slice_count(); ++j) {
    std::vector<double> v(a.slice(j).size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.slice(j)[i] - b.slice(j)[i];
    slices.push_back(std::make_shared<const DensityField>(a.size_grid(), std::move(v)));
  }
  return HistoryBuffer(a.delay(), std::move(slices), a.anchor_time());
}

RecruitmentKernel exponential_birth() {
  RecruitmentKernel k;
  k.family = "custom";
  k.base = [](double, double x, double) { return std::exp(-x); };
  k.R0 = k.R2 = k.L_R = 1.0;
  k.R1 = k.L_Rx = 2.0;
  return k;
}

}  // namespace

TEST_CASE("environment of the zero field is zero") {
  SizeGrid g(10.0, 100);
  DensityField zero(g);
  for (const auto& rho : {EnvironmentKernel::constant(1.0), EnvironmentKernel::gaussian(1.0, 1.0),
                          EnvironmentKernel::hierarchy_step(1.0)}) {
    auto N = environment(zero, rho);
    for (std::size_t i = 0; i < N.size(); ++i) CHECK(N[i] == 0.0);
  }
}

TEST_CASE("environment closed forms for an exponential density") {
  const double x_max = 40.0;
  SizeGrid g(x_max, 4000);
  auto n = DensityField::sample(g, [](double y) { return std::exp(-y); });
  // trapezoid bias on e^{-y} is about h^2 / 12 relative
  const double tol = 1e-5;

  auto flat = environment(n, EnvironmentKernel::constant(1.0));
  for (std::size_t i = 0; i < g.size(); i += 400) CHECK(flat[i] == doctest::Approx(1.0 - std::exp(-x_max)).epsilon(tol));

  auto tail = environment(n, EnvironmentKernel::hierarchy_step(1.0));
  for (std::size_t i = 0; i < g.size(); i += 400) {
    const double x = g.node(i);
    CHECK(tail[i] == doctest::Approx(std::exp(-x) - std::exp(-x_max)).epsilon(tol).scale(1e-12));
  }
}

TEST_CASE("environment is linear") {
  SizeGrid g(10.0, 200);
  std::mt19937_64 rng(11);
  auto n1 = random_slice(g, rng), n2 = random_slice(g, rng);
  const double a = 0.7, b = -1.3;
  DensityField combo(g);
  for (std::size_t i = 0; i < g.size(); ++i) combo[i] = a * n1[i] + b * n2[i];
  for (const auto& rho : {EnvironmentKernel::constant(0.5), EnvironmentKernel::gaussian(1.0, 0.8),
                          EnvironmentKernel::hierarchy_step(2.0)}) {
    auto N1 = environment(n1, rho), N2 = environment(n2, rho), Nc = environment(combo, rho);
    for (std::size_t i = 0; i < g.size(); ++i)
      CHECK(std::abs(Nc[i] - (a * N1[i] + b * N2[i])) <= 1e-12 * (std::abs(N1[i]) + std::abs(N2[i])) + 1e-300);
  }
}

TEST_CASE("recruitment of the zero history is zero") {
  SizeGrid g(10.0, 100);
  DelayGrid d(1.0, 10);
  auto h = HistoryBuffer::constant(d, DensityField(g));
  for (const auto& k : {RecruitmentKernel::separable_exponential(1.5, 0.5, 0.0, "saturating", 0.2),
                        RecruitmentKernel::parent_scaled(1.0, 0.5, 0.5, 0.0, "constant", 0.0), exponential_birth()}) {
    auto r = recruitment(h, k, EnvironmentKernel::hierarchy_step(1.0));
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == 0.0);
  }
}

TEST_CASE("recruitment separable closed form") {
  const double x_max = 40.0, tau = 1.0;
  SizeGrid g(x_max, 4000);
  DelayGrid d(tau, 10);
  auto h = HistoryBuffer::constant(d, DensityField::sample(g, [](double y) { return std::exp(-y); }));
  auto r = recruitment(h, exponential_birth(), EnvironmentKernel::constant(0.0));
  for (std::size_t i = 0; i < g.size(); i += 250) {
    const double x = g.node(i);
    CHECK(r[i] == doctest::Approx(tau * std::exp(-x) * (1.0 - std::exp(-x_max))).epsilon(1e-5).scale(1e-14));
  }
}

TEST_CASE("separable and generic recruitment paths agree") {
  SizeGrid g(14.0, 140);
  DelayGrid d(1.0, 10);
  std::mt19937_64 rng(5);
  auto h = random_history(g, d, rng);
  auto k = RecruitmentKernel::separable_exponential(1.5, 0.5, 0.3, "saturating", 0.2);
  auto rho = EnvironmentKernel::hierarchy_step(1.0);
  RecruitmentOperator fast(k, rho, g, d), slow(k, rho, g, d);
  slow.force_generic(true);
  auto a = fast.apply(h), b = slow.apply(h);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12).scale(1e-14));
}

TEST_CASE("recruitment rejects an incomplete history") {
  SizeGrid g(10.0, 100);
  DelayGrid d(1.0, 10);
  std::vector<FieldPtr> slices(5, std::make_shared<const DensityField>(g));
  HistoryBuffer partial(d, slices, 0.0);
  RecruitmentOperator op(exponential_birth(), EnvironmentKernel::constant(0.0), g, d);
  CHECK_THROWS_AS(op.apply(partial), SequencingError);
}

TEST_CASE("recruitment bounds and positivity on random histories") {
  SizeGrid g(14.0, 350);
  DelayGrid d(1.0, 20);
  auto rho = EnvironmentKernel::hierarchy_step(1.0);
  const RecruitmentKernel kernels[] = {RecruitmentKernel::separable_exponential(1.5, 0.5, 0.0, "saturating", 0.2),
                                       RecruitmentKernel::parent_scaled(1.0, 0.5, 0.5, 0.5, "constant", 0.0)};
  std::mt19937_64 rng(20240521);
  for (const auto& k : kernels) {
    RecruitmentOperator op(k, rho, g, d);
    for (int draw = 0; draw < 16; ++draw) {
      auto h = random_history(g, d, rng);
      auto r = op.apply(h);
      const double e = norm(h, NormKind::E);
      CHECK(r.min() >= 0.0);
      CHECK(norm(r, NormKind::X) <= k.R0 * e);
      CHECK(norm(r, NormKind::Sup) <= k.R2 * e);
      CHECK(norm(r, NormKind::Y) <= k.R1 * e);
    }
  }
}

TEST_CASE("recruitment Lipschitz bound on a ball") {
  SizeGrid g(14.0, 350);
  DelayGrid d(1.0, 20);
  auto rho = EnvironmentKernel::hierarchy_step(1.0);
  auto k = RecruitmentKernel::separable_exponential(1.5, 0.5, 0.0, "saturating", 0.2);
  RecruitmentOperator op(k, rho, g, d);
  std::mt19937_64 rng(3);
  for (int draw = 0; draw < 16; ++draw) {
    auto h1 = random_history(g, d, rng), h2 = random_history(g, d, rng);
    const double radius = std::max(norm(h1, NormKind::E), norm(h2, NormKind::E));
    auto r1 = op.apply(h1), r2 = op.apply(h2);
    DensityField dr(g);
    for (std::size_t i = 0; i < g.size(); ++i) dr[i] = r1[i] - r2[i];
    CHECK(norm(dr, NormKind::X) <= k.lipschitz_on_ball(radius, rho.sup) * norm(difference(h1, h2), NormKind::E));
  }
}

TEST_CASE("script_N on simple histories") {
  SizeGrid g(2.0, 20);
  DelayGrid d(1.0, 10);
  auto rho = EnvironmentKernel::constant(1.0);
  auto h = HistoryBuffer::constant(d, DensityField::sample(g, [](double) { return 1.0; }));
  // environment of the constant field is int_0^2 1 dy = 2
  const double n_star = 2.0;

  auto at0 = script_N(h, rho, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(at0[i] == 0.0);
  for (std::size_t j = 0; j < d.size(); ++j) {
    auto s = script_N(h, rho, d.node(j));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(s[i] == doctest::Approx(std::abs(d.node(j)) * n_star));
  }
  CHECK_THROWS_AS(script_N(h, rho, 0.1), DomainError);
  CHECK_THROWS_AS(script_N(h, rho, -1.5), DomainError);

  DelayGrid two(1.0, 1);
  const double a = 0.25, b = 3.0;
  HistoryBuffer pair(two,
                     {std::make_shared<const DensityField>(DensityField::sample(g, [&](double) { return a; })),
                      std::make_shared<const DensityField>(DensityField::sample(g, [&](double) { return b; }))},
                     0.0);
  auto s = script_N(pair, rho, -1.0);
  // hand trapezoid over xi in [-1, 0] of N = 2a, 2b
  const double hand = 0.5 * 1.0 * (2.0 * a + 2.0 * b);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(s[i] == doctest::Approx(hand));
}

TEST_CASE("norms of zero and exponential fields") {
  SizeGrid g(40.0, 4000);
  DelayGrid d(1.0, 10);
  DensityField zero(g);
  CHECK(norm(zero, NormKind::X) == 0.0);
  CHECK(norm(zero, NormKind::Y) == 0.0);
  CHECK(norm(zero, NormKind::Sup) == 0.0);
  CHECK(norm(HistoryBuffer::constant(d, zero), NormKind::E) == 0.0);

  auto u = DensityField::sample(g, [](double x) { return std::exp(-x); });
  CHECK(norm(u, NormKind::X) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(norm(u, NormKind::Y) == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(norm(u, NormKind::Sup) == 1.0);
  // constant history: E = tau ||u||_X
  CHECK(norm(HistoryBuffer::constant(d, u), NormKind::E) == doctest::Approx(norm(u, NormKind::X)).epsilon(1e-14));
}

TEST_CASE("norm shape mismatches and monotonicity") {
  SizeGrid g(10.0, 100);
  DelayGrid d(1.0, 10);
  std::mt19937_64 rng(17);
  auto u = random_slice(g, rng);
  auto h = random_history(g, d, rng);
  CHECK_THROWS_AS(norm(u, NormKind::E), DomainError);
  CHECK_THROWS_AS(norm(h, NormKind::X), DomainError);
  CHECK_THROWS_AS(norm(h, NormKind::Y), DomainError);
  CHECK(norm(u, NormKind::X) <= norm(u, NormKind::Y));
  CHECK(product_norm(h, u) == doctest::Approx(norm(h, NormKind::E) + norm(u, NormKind::X)).epsilon(1e-15));
}
