#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sizepop/coefficients.hpp"
#include "sizepop/grid.hpp"
#include "sizepop/record.hpp"

namespace sizepop {

/// Environment N(t, x) and its size slope N_x(t, x) as seen by a characteristic.
class EnvironmentField {
 public:
  virtual ~EnvironmentField() = default;
  virtual void sample(double t, double x, double& value, double& slope) const = 0;
  double value(double t, double x) const {
    double v = 0.0, s = 0.0;
    sample(t, x, v, s);
    return v;
  }
};

/// Stored environment profiles, linear in t between levels and linear in x between nodes.
class RecordEnvironment final : public EnvironmentField {
 public:
  /// Levels first_level, first_level + 1, ... at times t0 + k dt.
  RecordEnvironment(SizeGrid grid, double t0, double dt, std::ptrdiff_t first_level, std::size_t count);
  explicit RecordEnvironment(const SolutionRecord& record);

  /// Store the profile at level k; the slope is its central-difference derivative.
  void set_level(std::ptrdiff_t k, const SizeProfile& profile);
  void sample(double t, double x, double& value, double& slope) const override;

  /// Sample exactly at level k.
  void sample_level(std::ptrdiff_t k, double x, double& value, double& slope) const;

 private:
  SizeGrid grid_;
  double t0_, dt_;
  std::ptrdiff_t first_;
  std::vector<std::vector<double>> value_, slope_;
};

/// Analytic environment, e.g. a frozen profile N(x) for path tests.
class FrozenEnvironment final : public EnvironmentField {
 public:
  FrozenEnvironment(std::function<double(double)> value, std::function<double(double)> slope)
      : value_(std::move(value)), slope_(std::move(slope)) {}
  void sample(double, double x, double& value, double& slope) const override {
    value = value_(x);
    slope = slope_(x);
  }

 private:
  std::function<double(double)> value_, slope_;
};

enum class Direction { forward, backward };

/// Sampled path phi(t; t0, x0) of d phi / dt = gamma(phi, N(t, phi)).
struct CharacteristicPath {
  double t0 = 0.0;
  double x0 = 0.0;
  std::vector<double> times;
  std::vector<double> positions;
  /// int_{t0}^{t} D gamma ds, D gamma = gamma_x + gamma_N N_x, integrated with the path.
  std::vector<double> jacobian_log;
  /// Time at which a backward path reached x = 0.
  std::optional<double> exit_time;
};

struct TraceOptions {
  double dt = 0.01;
  /// Stop time; backward paths also stop at x = 0.
  double t_end = 0.0;
  /// Forward paths beyond this size raise TruncationError.
  double x_max = 0.0;
};

/// Classical RK4 with step dt (the last step is shortened to land on t_end).
CharacteristicPath trace_characteristic(double t0, double x0, const EnvironmentField& env,
                                        const ModelCoefficients& coeffs, Direction direction,
                                        const TraceOptions& options);
/// Trace through a record's environment profiles: backward to t = t_0, forward to the horizon.
CharacteristicPath trace_characteristic(double t0, double x0, const SolutionRecord& record,
                                        const ModelCoefficients& coeffs, Direction direction);

/// eta with phi(eta; t, x) = 0, or nothing when the point carries initial data (x >= z(t)).
std::optional<double> entry_time(double t, double x, const EnvironmentField& env, const ModelCoefficients& coeffs,
                                 double dt, double x_max, double t_start = 0.0);
std::optional<double> entry_time(double t, double x, const SolutionRecord& record, const ModelCoefficients& coeffs);

struct CharacteristicsOptions {
  double tol = 1e-8;
  std::size_t max_iter = 50;
};

/// One Picard update of levels first..last of the record from the representation formula along
/// characteristics. Environments and recruitments of every level <= last must be present.
/// Returns the new fields in level order.
std::vector<FieldPtr> picard_step(const SolutionRecord& record, const RecordEnvironment& env, const Model& model,
                                  std::ptrdiff_t first, std::ptrdiff_t last);

/// Method of steps on slabs of width tau, Picard iteration per slab.
SolutionRecord solve_characteristics(const HistoryBuffer& initial, const Model& model, double horizon,
                                     const CharacteristicsOptions& options = {});

}  // namespace sizepop
