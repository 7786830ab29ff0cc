#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "sizepop/characteristics.hpp"
#include "sizepop/coefficients.hpp"
#include "sizepop/grid.hpp"
#include "sizepop/initial.hpp"
#include "sizepop/semigroup.hpp"

namespace sizepop {

using ConfigTree = boost::property_tree::ptree;

struct SolverSettings {
  /// characteristics | upwind
  std::string method = "characteristics";
  double horizon = 1.0;
  CharacteristicsOptions picard;
  /// Density snapshots are written every this many levels (and at the last level).
  std::size_t snapshot_every = 10;
};

struct DiagnosticsSettings {
  bool enabled = true;
  bool dependence = false;
  std::vector<double> epsilons{1e-1, 1e-2, 1e-3};
  double bump_center = 2.0;
  double bump_width = 0.5;
  std::uint64_t seed = 7;
  std::size_t spot_checks = 100;
  std::size_t sample_budget = 4096;
};

/// One swept parameter, addressed as "section.key".
struct SweepAxis {
  std::string key;
  std::vector<double> values;
};

/// Fully parsed and validated configuration.
struct RunConfig {
  std::string name;
  SizeGrid grid{1.0, 1};
  DelayGrid delay{1.0, 1};
  Model model;
  InitialSpec initial;
  SolverSettings solver;
  DiagnosticsSettings diagnostics;
  BatterySettings semigroup;
  std::vector<SweepAxis> sweep;
};

/// Command-line overrides applied on top of the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::size_t refine = 1;
};

/// Parse an INI file; throws ConfigError on unreadable or malformed input.
ConfigTree read_config_tree(const std::string& path);
/// Parse INI text (relative CSV paths resolve against base_dir).
ConfigTree parse_config_text(const std::string& text);

/// Build and validate; every failure is a ConfigError naming the offending key.
RunConfig build_config(const ConfigTree& tree, const std::string& base_dir = ".", const Overrides& overrides = {});
RunConfig load_config(const std::string& path, const Overrides& overrides = {});

/// Set "section.key" to a numeric value.
void set_parameter(ConfigTree& tree, const std::string& key, double value);

}  // namespace sizepop
