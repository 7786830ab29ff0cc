#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sizepop/coefficients.hpp"
#include "sizepop/record.hpp"

namespace sizepop {

struct BoundPoint {
  double t = 0.0;
  double observed = 0.0;
  double bound = 0.0;
  /// bound - observed.
  double margin = 0.0;
};

/// Observed norm against a theoretical curve at every computed level t_k >= t_0.
struct BoundReport {
  std::string name;
  /// Formula branch used, e.g. "g1 (as printed)".
  std::string branch;
  /// Informative checks never gate a run.
  bool informative = false;
  std::vector<BoundPoint> points;
  std::map<std::string, double> parameters;
  bool pass = true;
  /// Every margin strictly positive.
  bool strict = true;
  double min_margin = 0.0;
  std::string detail;
};

/// Relative tolerance on margins: pass iff margin >= -tol * max(|bound|, tiny).
inline constexpr double kBoundTolerance = 1e-9;
/// Negative values down to -kPositivityTolerance * peak count as non-negative.
inline constexpr double kPositivityTolerance = 1e-12;

/// Norms of the initial history held in levels -p..0 of a record.
struct InitialNorms {
  double history_e = 0.0;      // ||n_hat||_E
  double initial_x = 0.0;      // ||n_hat_0||_X
  double initial_sup = 0.0;    // ||n_hat_0||_inf
  double initial_y = 0.0;      // ||n_hat_0||_Y
  double history_sigma = 0.0;  // ||d n_hat / d sigma||_E
  /// ||U_0||_Y = ||n_hat||_E + ||d n_hat / d sigma||_E + ||n_hat_0||_Y.
  double smooth_total = 0.0;
};

InitialNorms initial_norms(const SolutionRecord& record);

BoundReport check_positivity(const SolutionRecord& record);

/// ||n(t)||_X <= (R tau ||n_hat||_E + ||n_hat_0||_X) e^{R tau t}.
BoundReport check_L1_bound(const SolutionRecord& record, double r_bar);

/// ||n_t||_E <= ||n_hat||_E + (t + tau)(R tau ||n_hat||_E + ||n_hat_0||_X) e^{R tau t}, observed on
/// the ring snapshots.
BoundReport check_history_bound(const SolutionRecord& record, double r_bar);

/// Sampled min of gamma_x(x, N(t_k, x)) over the record, clipped to <= 0.
double estimate_lambda0(const SolutionRecord& record, const ModelCoefficients& coeffs);

/// Which closed form applies to the sup bound.
enum class SupBranch { g1, g2 };
SupBranch sup_branch(double r_bar, double tau, double lambda0);
/// g1 or g2 as printed; the ratio term of g1 is 0 when lambda0 = 0.
double sup_bound_value(SupBranch branch, double t, double r_bar, double tau, double lambda0, const InitialNorms& n);

/// ||n(t)||_inf against g1 / g2. lambda0 defaults to estimate_lambda0.
BoundReport check_sup_bound(const SolutionRecord& record, const ModelCoefficients& coeffs, double r_bar,
                            std::optional<double> lambda0 = std::nullopt);

/// c' with ||N_x||_1 <= c' ||n||_1 and c'' with ||N_x||_{W11}, ||N_x||_inf <= c'' ||n||_{W11}.
struct EnvironmentConstants {
  double c1 = 0.0;
  double c2 = 0.0;
};

/// c' from the size variation of rho(., y) and probe ratios; c'' from probe ratios. The record's
/// levels are included among the probes when given.
EnvironmentConstants estimate_environment_constants(const EnvironmentKernel& rho, const SizeGrid& grid,
                                                    const SolutionRecord* record = nullptr);

struct GradientOptions {
  /// Non-decreasing f_1(t) of the gradient bound; empty selects the default surrogate.
  std::function<double(double t)> f1;
  /// Sub-steps per level in the time integrals of the Gronwall chain.
  std::size_t substeps = 16;
};

/// ||n_x(t)||_X <= f(t) + f_2(t) int_0^t f(s) exp(int_s^t f_2) ds. Informative.
BoundReport check_gradient_bound(const SolutionRecord& record, const ModelCoefficients& coeffs, double r_bar,
                                 const EnvironmentKernel& rho, const GradientOptions& options = {});

/// ||d n(t + sigma) / d sigma||_E against the chain built on ||U_0||_Y.
BoundReport check_history_derivative_bound(const SolutionRecord& record, const ModelCoefficients& coeffs,
                                           double r_bar, const EnvironmentKernel& rho,
                                           const GradientOptions& options = {});

struct IdentityReport {
  bool pass = true;
  std::size_t levels_checked = 0;
  std::size_t shifted_checks = 0;
  std::size_t spot_checks = 0;
  std::string detail;
};

/// Slice j of the ring anchored at t_k is the stored level k - p + j (same object, same bits);
/// the ring at t_{k+1} is the ring at t_k shifted left by one slice; plus seeded random spot checks.
IdentityReport check_history_identity(const SolutionRecord& record, std::uint64_t seed = 7, std::size_t spot = 100);

using Runner = std::function<SolutionRecord(const HistoryBuffer&)>;

struct DependenceReport {
  std::vector<double> epsilons;
  std::vector<double> times;
  /// ratios[e][k] = ||n(t_k) - m(t_k)||_X / (||n_hat - m_hat||_E + ||n_hat_0 - m_hat_0||_X).
  std::vector<std::vector<double>> ratios;
  /// max over eps / min over eps per level.
  std::vector<double> spread;
  double max_spread = 0.0;
  bool pass = true;
  std::string detail;
};

/// Perturb every history slice by eps * bump and compare runs; pass iff ratios agree within
/// `factor` at every level.
DependenceReport check_continuous_dependence(const HistoryBuffer& base, const DensityField& bump, const Runner& run,
                                             std::vector<double> epsilons = {1e-1, 1e-2, 1e-3}, double factor = 3.0);

}  // namespace sizepop
