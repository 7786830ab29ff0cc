#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sizepop/assumptions.hpp"
#include "sizepop/config.hpp"
#include "sizepop/diagnostics.hpp"
#include "sizepop/record.hpp"

namespace sizepop::cli {

inline constexpr int kOk = 0;
inline constexpr int kConfigInvalid = 2;
inline constexpr int kCheckFailed = 3;
inline constexpr int kSolverFailed = 4;

struct Options {
  std::string config;
  std::filesystem::path out = ".";
  Overrides overrides;
  bool skip_checks = false;
};

/// Hash of the config file bytes plus any command-line overrides.
std::string config_hash(const std::string& path, const Overrides& overrides);

struct AssumptionChecks {
  AssumptionReport coefficients;
  AssumptionReport kernel;
  A5Result a5;
  bool pass() const { return coefficients.pass() && kernel.pass() && a5.pass; }
};

AssumptionChecks verify_assumptions(const RunConfig& config, const HistoryBuffer& initial);

/// Runs the configured solver over the configured horizon.
SolutionRecord solve(const RunConfig& config, const HistoryBuffer& initial, const std::string& method);

struct DiagnosticsResult {
  std::vector<BoundReport> bounds;
  IdentityReport identity;
  std::optional<DependenceReport> dependence;
  /// All gating checks passed (informative ones excluded).
  bool pass() const;
};

DiagnosticsResult run_diagnostics(const RunConfig& config, const HistoryBuffer& initial, const SolutionRecord& record);

int cmd_run(const Options& o);
int cmd_compare(const Options& o);
int cmd_semigroup_check(const Options& o);
int cmd_sweep(const Options& o);
int cmd_verify_assumptions(const Options& o);

/// Parses argv and dispatches; returns the process exit code.
int main(int argc, char** argv);

}  // namespace sizepop::cli
