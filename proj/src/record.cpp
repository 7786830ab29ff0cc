#include "sizepop/record.hpp"

#include <cmath>

#include <fmt/format.h>

#include "sizepop/errors.hpp"
#include "sizepop/operators.hpp"

namespace sizepop {

SolutionRecord::SolutionRecord(const HistoryBuffer& initial, std::size_t steps, std::string solver)
    : solver_(std::move(solver)),
      delay_(initial.delay()),
      grid_(initial.size_grid()),
      t0_(initial.anchor_time()),
      steps_(steps) {
  if (!initial.complete()) throw SequencingError("record: initial history is incomplete");
  const std::size_t total = delay_.size() + steps_;
  levels_.resize(total);
  env_.resize(total);
  recruit_.resize(total);
  rings_.resize(steps_ + 1);
  for (std::size_t j = 0; j < delay_.size(); ++j) levels_[j] = initial.slice_ptr(j);
}

std::size_t SolutionRecord::index(std::ptrdiff_t k) const {
  const std::ptrdiff_t i = k + static_cast<std::ptrdiff_t>(delay_.intervals());
  if (i < 0 || static_cast<std::size_t>(i) >= levels_.size())
    throw DomainError(fmt::format("record: level {} outside [{}, {}]", k, first_level(), steps_));
  return static_cast<std::size_t>(i);
}

bool SolutionRecord::has_level(std::ptrdiff_t k) const {
  const std::ptrdiff_t i = k + static_cast<std::ptrdiff_t>(delay_.intervals());
  return i >= 0 && static_cast<std::size_t>(i) < levels_.size() && levels_[static_cast<std::size_t>(i)] != nullptr;
}

const DensityField& SolutionRecord::level(std::ptrdiff_t k) const { return *level_ptr(k); }

const FieldPtr& SolutionRecord::level_ptr(std::ptrdiff_t k) const {
  const auto& p = levels_[index(k)];
  if (!p) throw SequencingError(fmt::format("record: level {} not computed yet", k));
  return p;
}

void SolutionRecord::set_level(std::ptrdiff_t k, FieldPtr field) {
  if (k <= 0) throw SequencingError("record: initial history levels are fixed");
  if (!field || !(field->grid() == grid_)) throw DomainError("record: field grid differs from the record grid");
  levels_[index(k)] = std::move(field);
}

std::ptrdiff_t SolutionRecord::last_level() const {
  std::ptrdiff_t k = 0;
  while (k < static_cast<std::ptrdiff_t>(steps_) && has_level(k + 1)) ++k;
  return k;
}

bool SolutionRecord::has_environment(std::ptrdiff_t k) const { return env_[index(k)].has_value(); }

const SizeProfile& SolutionRecord::environment(std::ptrdiff_t k) const {
  const auto& e = env_[index(k)];
  if (!e) throw SequencingError(fmt::format("record: environment at level {} not computed", k));
  return *e;
}

void SolutionRecord::set_environment(std::ptrdiff_t k, SizeProfile profile) { env_[index(k)] = std::move(profile); }

bool SolutionRecord::has_recruitment(std::ptrdiff_t k) const { return k >= 0 && recruit_[index(k)].has_value(); }

const SizeProfile& SolutionRecord::recruitment(std::ptrdiff_t k) const {
  const auto& r = recruit_[index(k)];
  if (!r || k < 0) throw SequencingError(fmt::format("record: recruitment at level {} not computed", k));
  return *r;
}

void SolutionRecord::set_recruitment(std::ptrdiff_t k, SizeProfile profile) {
  if (k < 0) throw DomainError("record: recruitment is stored for levels k >= 0 only");
  recruit_[index(k)] = std::move(profile);
}

HistoryBuffer SolutionRecord::history_at(std::ptrdiff_t k) const {
  std::vector<FieldPtr> slices;
  slices.reserve(delay_.size());
  const auto p = static_cast<std::ptrdiff_t>(delay_.intervals());
  for (std::ptrdiff_t j = 0; j <= p; ++j) slices.push_back(level_ptr(k - p + j));
  return HistoryBuffer(delay_, std::move(slices), time(k));
}

const HistoryBuffer& SolutionRecord::ring_at(std::ptrdiff_t k) const {
  if (k < 0 || static_cast<std::size_t>(k) > steps_ || !rings_[static_cast<std::size_t>(k)])
    throw SequencingError(fmt::format("record: no ring snapshot at level {}", k));
  return *rings_[static_cast<std::size_t>(k)];
}

bool SolutionRecord::has_ring(std::ptrdiff_t k) const {
  return k >= 0 && static_cast<std::size_t>(k) <= steps_ && rings_[static_cast<std::size_t>(k)].has_value();
}

void SolutionRecord::set_ring(std::ptrdiff_t k, HistoryBuffer ring) {
  if (k < 0 || static_cast<std::size_t>(k) > steps_) throw DomainError("record: ring level out of range");
  rings_[static_cast<std::size_t>(k)] = std::move(ring);
}

void SolutionRecord::fill_rings() {
  const std::ptrdiff_t last = last_level();
  for (std::ptrdiff_t k = 0; k <= last; ++k)
    if (!rings_[static_cast<std::size_t>(k)]) rings_[static_cast<std::size_t>(k)] = history_at(k);
}

double guard_truncation(const DensityField& n, std::ptrdiff_t level) {
  const double mass = norm(n, NormKind::X);
  const double edge = std::abs(n[n.size() - 1]);
  if (edge == 0.0) return 0.0;
  const double ratio = mass > 0.0 ? edge / mass : INFINITY;
  if (ratio > kBoundaryDensityRatio)
    throw TruncationError(fmt::format(
        "density at x_max = {:.6g} is {:.3g} of the total mass at level {} (limit {:.0e}); enlarge x_max",
        edge, ratio, level, kBoundaryDensityRatio));
  return ratio;
}

}  // namespace sizepop
