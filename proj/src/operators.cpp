#include "sizepop/operators.hpp"

#include <algorithm>
#include <cmath>

#include "sizepop/errors.hpp"
#include "sizepop/quadrature.hpp"

namespace sizepop {

std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::X: return "X";
    case NormKind::Y: return "Y";
    case NormKind::E: return "E";
    case NormKind::Sup: return "SUP";
  }
  return "?";
}

double norm(const DensityField& u, NormKind kind) {
  const double h = u.grid().dx();
  switch (kind) {
    case NormKind::X: return quad::trapezoid_abs(u.values(), h);
    case NormKind::Y: {
      const auto d = quad::derivative(u.values(), h);
      return quad::trapezoid_abs(u.values(), h) + quad::trapezoid_abs(d, h);
    }
    case NormKind::Sup: return u.max_abs();
    case NormKind::E: break;
  }
  throw DomainError("norm: E-norm needs a history segment, got a single slice");
}

double norm(const HistoryBuffer& h, NormKind kind) {
  if (!h.complete()) throw SequencingError("norm: incomplete history");
  switch (kind) {
    case NormKind::E: {
      std::vector<double> per_slice(h.slice_count());
      for (std::size_t j = 0; j < per_slice.size(); ++j) per_slice[j] = norm(h.slice(j), NormKind::X);
      return quad::trapezoid(per_slice, h.delay().dsigma());
    }
    case NormKind::Sup: {
      double m = 0.0;
      for (std::size_t j = 0; j < h.slice_count(); ++j) m = std::max(m, h.slice(j).max_abs());
      return m;
    }
    case NormKind::X:
    case NormKind::Y: break;
  }
  throw DomainError("norm: " + to_string(kind) + "-norm needs a single slice, got a history segment");
}

double product_norm(const HistoryBuffer& h, const DensityField& u) {
  return norm(h, NormKind::E) + norm(u, NormKind::X);
}

double sigma_derivative_norm(const HistoryBuffer& h) {
  if (!h.complete()) throw SequencingError("sigma_derivative_norm: incomplete history");
  const std::size_t ns = h.slice_count();
  const std::size_t nx = h.size_grid().size();
  std::vector<double> column(ns), per_slice(ns, 0.0);
  const auto wx = quad::trapezoid_weights(nx, h.size_grid().dx());
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ns; ++j) column[j] = h.slice(j)[i];
    const auto d = quad::derivative(column, h.delay().dsigma());
    for (std::size_t j = 0; j < ns; ++j) per_slice[j] += wx[i] * std::abs(d[j]);
  }
  return quad::trapezoid(per_slice, h.delay().dsigma());
}

double product_norm_smooth(const HistoryBuffer& h, const DensityField& u) {
  return norm(h, NormKind::E) + sigma_derivative_norm(h) + norm(u, NormKind::Y);
}

EnvironmentOperator::EnvironmentOperator(EnvironmentKernel kernel, SizeGrid grid)
    : kernel_(std::move(kernel)), grid_(grid) {
  using F = EnvironmentKernel::Family;
  if (kernel_.family == F::gaussian || kernel_.family == F::custom) {
    const std::size_t n = grid_.size();
    const auto w = quad::trapezoid_weights(n, grid_.dx());
    weighted_.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = grid_.node(i);
      for (std::size_t k = 0; k < n; ++k) weighted_[i * n + k] = w[k] * kernel_.rho(x, grid_.node(k));
    }
  }
}

SizeProfile EnvironmentOperator::apply(const DensityField& n) const {
  if (!(n.grid() == grid_)) throw DomainError("environment: density and kernel grids differ");
  const std::size_t m = grid_.size();
  const double h = grid_.dx();
  std::vector<double> out(m, 0.0);
  using F = EnvironmentKernel::Family;
  switch (kernel_.family) {
    case F::constant: {
      const double total = kernel_.amplitude * quad::trapezoid(n.values(), h);
      std::fill(out.begin(), out.end(), total);
      break;
    }
    case F::hierarchy_step: {
      double tail = 0.0;
      for (std::size_t i = m - 1; i-- > 0;) {
        tail += 0.5 * h * (n[i] + n[i + 1]);
        out[i] = kernel_.amplitude * tail;
      }
      break;
    }
    case F::gaussian:
    case F::custom: {
      for (std::size_t i = 0; i < m; ++i) {
        const double* row = &weighted_[i * m];
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) s += row[k] * n[k];
        out[i] = s;
      }
      break;
    }
  }
  return SizeProfile(grid_, std::move(out));
}

SizeProfile environment(const DensityField& n, const EnvironmentKernel& rho) {
  return EnvironmentOperator(rho, n.grid()).apply(n);
}

bool exceeds_cap(const SizeProfile& profile, double K) {
  for (double v : profile.values())
    if (v > K) return true;
  return false;
}

std::vector<double> script_n_table(std::span<const SizeProfile* const> slice_env, const DelayGrid& delay) {
  const std::size_t ns = delay.size();
  if (slice_env.size() != ns) throw SequencingError("script_N: need one environment profile per slice");
  const std::size_t nx = slice_env[0]->size();
  std::vector<double> table(ns * nx, 0.0);
  const double half = 0.5 * delay.dsigma();
  for (std::size_t j = ns - 1; j-- > 0;) {
    const auto& lo = *slice_env[j];
    const auto& hi = *slice_env[j + 1];
    for (std::size_t i = 0; i < nx; ++i) table[j * nx + i] = table[(j + 1) * nx + i] + half * (lo[i] + hi[i]);
  }
  return table;
}

SizeProfile script_N(const HistoryBuffer& h, const EnvironmentKernel& rho, double sigma) {
  const auto& delay = h.delay();
  if (!(sigma >= -delay.tau() && sigma <= 0.0) || !std::isfinite(sigma))
    throw DomainError("script_N: sigma must lie in [-tau, 0]");
  if (!h.complete()) throw SequencingError("script_N: incomplete history");
  const SizeGrid grid = h.size_grid();
  EnvironmentOperator env(rho, grid);
  // first delay node at or above sigma
  std::size_t j0 = 0;
  while (j0 < delay.intervals() && delay.node(j0) < sigma - 1e-12 * delay.tau()) ++j0;
  std::vector<double> out(grid.size(), 0.0);
  if (j0 == delay.intervals()) return SizeProfile(grid, std::move(out));
  std::vector<SizeProfile> profiles;
  profiles.reserve(delay.size() - j0);
  for (std::size_t j = j0; j < delay.size(); ++j) profiles.push_back(env.apply(h.slice(j)));
  const double half = 0.5 * delay.dsigma();
  for (std::size_t q = 0; q + 1 < profiles.size(); ++q)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += half * (profiles[q][i] + profiles[q + 1][i]);
  return SizeProfile(grid, std::move(out));
}

RecruitmentOperator::RecruitmentOperator(RecruitmentKernel kernel, EnvironmentKernel rho, SizeGrid grid,
                                         DelayGrid delay)
    : kernel_(std::move(kernel)), env_(std::move(rho), grid), grid_(grid), delay_(delay) {
  wy_ = quad::trapezoid_weights(grid_.size(), grid_.dx());
  wsigma_ = quad::trapezoid_weights(delay_.size(), delay_.dsigma());
  if (kernel_.separable) {
    const auto& sf = *kernel_.separable;
    birth_.resize(grid_.size());
    fert_w_.resize(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      birth_[i] = sf.amplitude * sf.birth_profile(grid_.node(i));
      fert_w_[i] = wy_[i] * sf.fertility(grid_.node(i));
    }
    sigma_w_.resize(delay_.size());
    for (std::size_t j = 0; j < delay_.size(); ++j) sigma_w_[j] = wsigma_[j] * sf.sigma_weight(delay_.node(j));
  }
}

void RecruitmentOperator::check(const HistoryBuffer& h) const {
  if (!h.complete())
    throw SequencingError("recruitment: history has " + std::to_string(h.slice_count()) + " of " +
                          std::to_string(delay_.size()) + " slices");
  if (!(h.delay() == delay_) || !(h.size_grid() == grid_))
    throw DomainError("recruitment: history grids differ from the operator grids");
}

SizeProfile RecruitmentOperator::apply(const HistoryBuffer& h) const {
  check(h);
  if (!kernel_.depends_on_environment()) return apply(h, {});
  std::vector<SizeProfile> profiles;
  profiles.reserve(h.slice_count());
  for (std::size_t j = 0; j < h.slice_count(); ++j) profiles.push_back(env_.apply(h.slice(j)));
  std::vector<const SizeProfile*> ptrs;
  for (const auto& p : profiles) ptrs.push_back(&p);
  return apply(h, ptrs);
}

SizeProfile RecruitmentOperator::apply(const HistoryBuffer& h, std::span<const SizeProfile* const> slice_env) const {
  check(h);
  if (kernel_.is_zero()) return SizeProfile(grid_);
  std::vector<double> table;
  if (kernel_.depends_on_environment()) {
    if (slice_env.size() != h.slice_count())
      throw SequencingError("recruitment: environment-dependent kernel needs slice environments");
    table = script_n_table(slice_env, delay_);
  }
  const std::vector<double>* sn = table.empty() ? nullptr : &table;
  if (kernel_.separable && !force_generic_) return apply_separable(h, sn);
  return apply_generic(h, sn);
}

SizeProfile RecruitmentOperator::apply_separable(const HistoryBuffer& h, const std::vector<double>* sn) const {
  const std::size_t ns = delay_.size();
  const std::size_t nx = grid_.size();
  std::vector<double> coeff(ns);
  for (std::size_t j = 0; j < ns; ++j) {
    const auto& slice = h.slice(j);
    double s = 0.0;
    for (std::size_t k = 0; k < nx; ++k) s += fert_w_[k] * slice[k];
    coeff[j] = sigma_w_[j] * s;
  }
  std::vector<double> out(nx, 0.0);
  if (!sn) {
    double total = 0.0;
    for (std::size_t j = 0; j < ns; ++j) total += coeff[j];
    for (std::size_t i = 0; i < nx; ++i) out[i] = birth_[i] * total;
  } else {
    const auto& g = kernel_.modulation;
    for (std::size_t i = 0; i < nx; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < ns; ++j) s += coeff[j] * g((*sn)[j * nx + i]);
      out[i] = birth_[i] * s;
    }
  }
  return SizeProfile(grid_, std::move(out));
}

SizeProfile RecruitmentOperator::apply_generic(const HistoryBuffer& h, const std::vector<double>* sn) const {
  const std::size_t ns = delay_.size();
  const std::size_t nx = grid_.size();
  std::vector<double> out(nx, 0.0);
  for (std::size_t i = 0; i < nx; ++i) {
    const double x = grid_.node(i);
    double total = 0.0;
    for (std::size_t j = 0; j < ns; ++j) {
      const double sigma = delay_.node(j);
      const auto& slice = h.slice(j);
      double s = 0.0;
      for (std::size_t k = 0; k < nx; ++k) s += wy_[k] * kernel_.base(sigma, x, grid_.node(k)) * slice[k];
      if (sn) s *= kernel_.modulation((*sn)[j * nx + i]);
      total += wsigma_[j] * s;
    }
    out[i] = total;
  }
  return SizeProfile(grid_, std::move(out));
}

SizeProfile recruitment(const HistoryBuffer& h, const RecruitmentKernel& kernel, const EnvironmentKernel& rho) {
  if (!h.complete()) throw SequencingError("recruitment: incomplete history");
  return RecruitmentOperator(kernel, rho, h.size_grid(), h.delay()).apply(h);
}

}  // namespace sizepop
