#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sizepop {

/// Argument outside the mathematical domain of an operation (bad grid, sigma outside [-tau,0], ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration text could not be parsed or describes an invalid model.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A solver was driven out of order, e.g. recruitment on an incomplete history.
class SequencingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Explicit scheme step violates dt * gamma_hi <= dx.
class CflError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Density reached the truncation boundary x_max.
class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Picard iteration on a slab did not reach the tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::size_t slab, double last_residual)
      : std::runtime_error(what), slab_(slab), last_residual_(last_residual) {}
  std::size_t slab() const { return slab_; }
  double last_residual() const { return last_residual_; }

 private:
  std::size_t slab_;
  double last_residual_;
};

/// Non-finite value produced during time marching.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace sizepop
