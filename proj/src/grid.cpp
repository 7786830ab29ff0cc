#include "sizepop/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sizepop/errors.hpp"

namespace sizepop {

SizeGrid::SizeGrid(double x_max, std::size_t cells) : x_max_(x_max), cells_(cells), dx_(0.0) {
  if (!(x_max > 0.0) || !std::isfinite(x_max)) throw DomainError("SizeGrid: x_max must be positive and finite");
  if (cells == 0) throw DomainError("SizeGrid: cell count must be positive");
  dx_ = x_max / static_cast<double>(cells);
}

std::vector<double> SizeGrid::nodes() const {
  std::vector<double> x(size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = node(i);
  return x;
}

SizeGrid SizeGrid::refined(std::size_t factor) const {
  if (factor == 0) throw DomainError("SizeGrid: refinement factor must be positive");
  return SizeGrid(x_max_, cells_ * factor);
}

DelayGrid::DelayGrid(double tau, std::size_t intervals) : tau_(tau), intervals_(intervals), dsigma_(0.0) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("DelayGrid: tau must be positive and finite");
  if (intervals == 0) throw DomainError("DelayGrid: interval count must be positive");
  dsigma_ = tau / static_cast<double>(intervals);
}

double DelayGrid::node(std::size_t j) const {
  if (j == intervals_) return 0.0;
  if (j == 0) return -tau_;
  return -tau_ + static_cast<double>(j) * dsigma_;
}

std::vector<double> DelayGrid::nodes() const {
  std::vector<double> s(size());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = node(j);
  return s;
}

DelayGrid DelayGrid::refined(std::size_t factor) const {
  if (factor == 0) throw DomainError("DelayGrid: refinement factor must be positive");
  return DelayGrid(tau_, intervals_ * factor);
}

DensityField::DensityField(SizeGrid grid) : grid_(grid), values_(grid.size(), 0.0) {}

DensityField::DensityField(SizeGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw DomainError("DensityField: expected " + std::to_string(grid_.size()) + " values, got " +
                      std::to_string(values_.size()));
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]))
      throw DomainError("DensityField: non-finite value at node " + std::to_string(i));
  }
}

double DensityField::min() const { return *std::min_element(values_.begin(), values_.end()); }

double DensityField::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

HistoryBuffer::HistoryBuffer(DelayGrid delay, std::vector<FieldPtr> slices, double anchor_time)
    : delay_(delay), slices_(std::move(slices)), anchor_time_(anchor_time) {
  if (slices_.size() > delay_.size()) throw DomainError("HistoryBuffer: more slices than delay nodes");
}

HistoryBuffer HistoryBuffer::constant(DelayGrid delay, const DensityField& field, double anchor_time) {
  auto shared = std::make_shared<const DensityField>(field);
  return HistoryBuffer(delay, std::vector<FieldPtr>(delay.size(), shared), anchor_time);
}

bool HistoryBuffer::complete() const {
  if (slices_.size() != delay_.size()) return false;
  for (const auto& s : slices_) {
    if (!s || !(s->grid() == slices_.back()->grid())) return false;
  }
  return true;
}

const DensityField& HistoryBuffer::slice(std::size_t j) const {
  const auto& p = slices_.at(j);
  if (!p) throw SequencingError("HistoryBuffer: slice " + std::to_string(j) + " is missing");
  return *p;
}

void HistoryBuffer::advance(FieldPtr next, double new_anchor) {
  if (slices_.empty()) throw SequencingError("HistoryBuffer: cannot advance an empty buffer");
  std::rotate(slices_.begin(), slices_.begin() + 1, slices_.end());
  slices_.back() = std::move(next);
  anchor_time_ = new_anchor;
}

}  // namespace sizepop
