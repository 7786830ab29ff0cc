#include "sizepop/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include "sizepop/characteristics.hpp"
#include "sizepop/errors.hpp"
#include "sizepop/initial.hpp"
#include "sizepop/io.hpp"
#include "sizepop/operators.hpp"
#include "sizepop/semigroup.hpp"
#include "sizepop/upwind.hpp"

namespace sizepop::cli {

namespace {

using io::Json;

void report(const std::string& msg) { fmt::print(stderr, "sizepop: {}\n", msg); }

/// Maps library exceptions to exit codes; anything else propagates.
template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    report(fmt::format("invalid configuration: {}", e.what()));
    return kConfigInvalid;
  } catch (const DomainError& e) {
    report(fmt::format("invalid configuration: {}", e.what()));
    return kConfigInvalid;
  } catch (const ConvergenceError& e) {
    report(fmt::format("solver failed: {} (slab {}, residual {:.3e})", e.what(), e.slab(), e.last_residual()));
    return kSolverFailed;
  } catch (const NumericalError& e) {
    report(fmt::format("solver failed: {} (step {})", e.what(), e.step()));
    return kSolverFailed;
  } catch (const CflError& e) {
    report(fmt::format("solver failed: {}", e.what()));
    return kSolverFailed;
  } catch (const TruncationError& e) {
    report(fmt::format("solver failed: {}", e.what()));
    return kSolverFailed;
  }
}

Json grid_json(const RunConfig& c) {
  Json j;
  j["x_max"] = io::json_number(c.grid.x_max());
  j["cells"] = c.grid.cells();
  j["dx"] = io::json_number(c.grid.dx());
  j["tau"] = io::json_number(c.delay.tau());
  j["intervals"] = c.delay.intervals();
  j["dt"] = io::json_number(c.delay.dsigma());
  return j;
}

Json model_json(const RunConfig& c) {
  const auto& b = c.model.coefficients.bounds;
  Json j;
  j["growth"] = c.model.coefficients.growth_family;
  j["mortality"] = c.model.coefficients.mortality_family;
  j["bounds"] = {{"gamma_lo", io::json_number(b.gamma_lo)}, {"gamma_hi", io::json_number(b.gamma_hi)},
                 {"gamma_d1", io::json_number(b.gamma_d1)}, {"gamma_d2", io::json_number(b.gamma_d2)},
                 {"mu_hi", io::json_number(b.mu_hi)},       {"mu_x_hi", io::json_number(b.mu_x_hi)},
                 {"mu_N_hi", io::json_number(b.mu_N_hi)},   {"K", io::json_number(b.K)}};
  j["environment"] = {{"family", to_string(c.model.environment.family)},
                      {"amplitude", io::json_number(c.model.environment.amplitude)}};
  const auto& r = c.model.recruitment;
  j["recruitment"] = {{"family", r.family},
                      {"R0", io::json_number(r.R0)},
                      {"R1", io::json_number(r.R1)},
                      {"R2", io::json_number(r.R2)},
                      {"R_bar", io::json_number(r.r_bar())},
                      {"environment_dependent", r.depends_on_environment()}};
  j["initial"] = {{"family", c.initial.family}, {"mass", io::json_number(c.initial.mass)}};
  return j;
}

Json checks_json(const AssumptionChecks& a) {
  Json j;
  j["pass"] = a.pass();
  j["coefficients"] = io::to_json(a.coefficients);
  j["kernel"] = io::to_json(a.kernel);
  j["A5"] = io::to_json(a.a5);
  return j;
}

Json record_json(const SolutionRecord& rec) {
  Json j;
  j["solver"] = rec.solver();
  j["levels"] = rec.last_level() + 1;
  j["horizon"] = io::json_number(rec.horizon());
  j["boundary_ratio"] = io::json_number(rec.boundary_ratio);
  j["boundary_limit"] = io::json_number(kBoundaryDensityRatio);
  j["cap_exceeded_levels"] = rec.cap_exceeded_levels;
  if (!rec.slabs.empty()) {
    j["slabs"] = Json::array();
    for (const auto& s : rec.slabs) j["slabs"].push_back(io::to_json(s));
  }
  if (!rec.mass_balance_residuals.empty()) {
    double worst = 0.0;
    for (double r : rec.mass_balance_residuals) worst = std::max(worst, r);
    j["max_mass_balance_residual"] = io::json_number(worst);
  }
  const DensityField& last = rec.level(rec.last_level());
  j["final"] = {{"X", io::json_number(norm(last, NormKind::X))},
                {"sup", io::json_number(norm(last, NormKind::Sup))},
                {"min", io::json_number(last.min())}};
  return j;
}

Json diagnostics_json(const DiagnosticsResult& d) {
  Json j;
  j["pass"] = d.pass();
  j["bounds"] = Json::array();
  for (const auto& b : d.bounds) j["bounds"].push_back(io::to_json(b));
  j["history_identity"] = io::to_json(d.identity);
  if (d.dependence) j["continuous_dependence"] = io::to_json(*d.dependence);
  return j;
}

double relative_l1(const DensityField& a, const DensityField& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  const double diff = norm(DensityField(a.grid(), std::move(d)), NormKind::X);
  const double scale = norm(b, NormKind::X);
  if (scale == 0.0) return diff == 0.0 ? 0.0 : INFINITY;
  return diff / scale;
}

std::string base_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  return parent.empty() ? "." : parent.string();
}

}  // namespace

std::string config_hash(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string data = buf.str();
  if (overrides.seed) data += fmt::format("\n#override seed={}", *overrides.seed);
  if (overrides.refine != 1) data += fmt::format("\n#override refine={}", overrides.refine);
  return io::sha256_hex(data);
}

AssumptionChecks verify_assumptions(const RunConfig& c, const HistoryBuffer& initial) {
  AssumptionChecks a;
  a.coefficients = check_A2_A3(c.model.coefficients, c.grid.x_max(), c.diagnostics.sample_budget);
  KernelCheckOptions ko;
  ko.K = c.model.coefficients.bounds.K;
  a.kernel = check_H_conditions(c.model.recruitment, c.grid, c.delay, ko);
  a.a5 = check_A5(c.model.coefficients, environment(initial.newest(), c.model.environment));
  return a;
}

SolutionRecord solve(const RunConfig& c, const HistoryBuffer& initial, const std::string& method) {
  if (method == "upwind") return solve_upwind(initial, c.model, c.solver.horizon);
  return solve_characteristics(initial, c.model, c.solver.horizon, c.solver.picard);
}

bool DiagnosticsResult::pass() const {
  for (const auto& b : bounds)
    if (!b.informative && !b.pass) return false;
  return identity.pass && (!dependence || dependence->pass);
}

DiagnosticsResult run_diagnostics(const RunConfig& c, const HistoryBuffer& initial, const SolutionRecord& rec) {
  DiagnosticsResult d;
  const double r_bar = c.model.recruitment.r_bar();
  const auto& coeffs = c.model.coefficients;
  d.bounds.push_back(check_positivity(rec));
  d.bounds.push_back(check_L1_bound(rec, r_bar));
  d.bounds.push_back(check_history_bound(rec, r_bar));
  d.bounds.push_back(check_sup_bound(rec, coeffs, r_bar));
  d.bounds.push_back(check_gradient_bound(rec, coeffs, r_bar, c.model.environment));
  d.bounds.push_back(check_history_derivative_bound(rec, coeffs, r_bar, c.model.environment));
  d.identity = check_history_identity(rec, c.diagnostics.seed, c.diagnostics.spot_checks);
  if (c.diagnostics.dependence) {
    const double c0 = c.diagnostics.bump_center, w = c.diagnostics.bump_width;
    const DensityField bump = DensityField::sample(c.grid, [&](double x) {
      const double z = (x - c0) / w;
      return std::exp(-0.5 * z * z);
    });
    const std::string method = rec.solver();
    d.dependence = check_continuous_dependence(
        initial, bump, [&](const HistoryBuffer& h) { return solve(c, h, method); }, c.diagnostics.epsilons);
  }
  return d;
}

int cmd_verify_assumptions(const Options& o) {
  return guarded([&] {
    const RunConfig c = load_config(o.config, o.overrides);
    const std::string hash = config_hash(o.config, o.overrides);
    const HistoryBuffer initial = make_initial_history(c.initial, c.grid, c.delay);
    const AssumptionChecks a = verify_assumptions(c, initial);
    Json body;
    body["command"] = "verify-assumptions";
    body["grid"] = grid_json(c);
    body["model"] = model_json(c);
    body["checks"] = checks_json(a);
    io::write_json(o.out / "assumptions.json", hash, body);
    if (!a.pass()) report("assumption checks failed; see assumptions.json");
    return a.pass() ? kOk : kCheckFailed;
  });
}

int cmd_run(const Options& o) {
  return guarded([&] {
    const RunConfig c = load_config(o.config, o.overrides);
    const std::string hash = config_hash(o.config, o.overrides);
    const HistoryBuffer initial = make_initial_history(c.initial, c.grid, c.delay);
    Json body;
    body["command"] = "run";
    body["config"] = c.name;
    body["grid"] = grid_json(c);
    body["model"] = model_json(c);
    body["solver"] = {{"method", c.solver.method},
                      {"horizon", io::json_number(c.solver.horizon)},
                      {"tol", io::json_number(c.solver.picard.tol)},
                      {"max_iter", c.solver.picard.max_iter}};
    if (!o.skip_checks) {
      const AssumptionChecks a = verify_assumptions(c, initial);
      body["checks"] = checks_json(a);
      if (!a.pass()) {
        body["status"] = "assumption_failed";
        io::write_json(o.out / "summary.json", hash, body);
        report("assumption checks failed; see summary.json (use --skip-checks to override)");
        return kCheckFailed;
      }
    } else {
      body["checks"] = "skipped";
    }

    std::optional<SolutionRecord> rec;
    const int code = guarded([&] {
      rec.emplace(solve(c, initial, c.solver.method));
      return kOk;
    });
    if (code != kOk) {
      body["status"] = code == kSolverFailed ? "solver_failed" : "config_invalid";
      io::write_json(o.out / "summary.json", hash, body);
      return code;
    }
    body["record"] = record_json(*rec);
    io::write_densities(o.out / "densities.csv", hash, *rec, c.solver.snapshot_every);
    io::write_norms(o.out / "norms.csv", hash, *rec);
    if (c.diagnostics.enabled) {
      const DiagnosticsResult d = run_diagnostics(c, initial, *rec);
      body["diagnostics"] = diagnostics_json(d);
      io::write_margins(o.out / "margins.csv", hash, d.bounds);
      if (!d.pass()) report("warning: a gating diagnostic failed; see summary.json");
    }
    body["status"] = "ok";
    io::write_json(o.out / "summary.json", hash, body);
    return kOk;
  });
}

int cmd_compare(const Options& o) {
  return guarded([&] {
    const RunConfig c = load_config(o.config, o.overrides);
    Overrides finer = o.overrides;
    finer.refine *= 2;
    const RunConfig f = load_config(o.config, finer);
    const std::string hash = config_hash(o.config, o.overrides);
    const HistoryBuffer hc = make_initial_history(c.initial, c.grid, c.delay);
    const HistoryBuffer hf = make_initial_history(f.initial, f.grid, f.delay);
    const SolutionRecord cu = solve(c, hc, "upwind"), cc = solve(c, hc, "characteristics");
    const SolutionRecord fu = solve(f, hf, "upwind"), fc = solve(f, hf, "characteristics");

    io::CsvWriter csv(o.out / "compare.csv", hash, {"t", "difference", "difference_refined"});
    double worst = 0.0, worst_fine = 0.0;
    for (std::ptrdiff_t k = 0; k <= cc.last_level(); ++k) {
      const double d = relative_l1(cu.level(k), cc.level(k));
      const double df = relative_l1(fu.level(2 * k), fc.level(2 * k));
      worst = std::max(worst, d);
      worst_fine = std::max(worst_fine, df);
      csv.row({cc.time(k), d, df});
    }
    const std::ptrdiff_t last = cc.last_level();
    const double final_d = relative_l1(cu.level(last), cc.level(last));
    const double final_f = relative_l1(fu.level(2 * last), fc.level(2 * last));
    Json body;
    body["command"] = "compare";
    body["config"] = c.name;
    body["grid"] = grid_json(c);
    body["final_difference"] = io::json_number(final_d);
    body["final_difference_refined"] = io::json_number(final_f);
    body["max_difference"] = io::json_number(worst);
    body["max_difference_refined"] = io::json_number(worst_fine);
    body["decreasing"] = final_f < final_d || (final_d == 0.0 && final_f == 0.0);
    body["characteristics"] = record_json(cc);
    body["upwind"] = record_json(cu);
    io::write_json(o.out / "compare.json", hash, body);
    return kOk;
  });
}

int cmd_semigroup_check(const Options& o) {
  return guarded([&] {
    const RunConfig c = load_config(o.config, o.overrides);
    const std::string hash = config_hash(o.config, o.overrides);
    const BatterySettings& s = c.semigroup;
    const auto contraction = contraction_battery(s, c.model.coefficients, c.model.environment);
    const auto equivalence = norm_equivalence_battery(s);
    const auto round_trip = round_trip_refinement(s);
    const auto closed = closed_form_resolvent(0.01, s.intervals);
    const auto residual = resolvent_residual_refinement(s, c.model.coefficients, c.model.environment);

    bool pass = true;
    Json body;
    body["command"] = "semigroup-check";
    body["seed"] = s.seed;
    body["contraction"] = Json::array();
    for (const auto& r : contraction) {
      pass = pass && r.violations == 0 && r.component_violations == 0;
      body["contraction"].push_back(io::to_json(r));
    }
    const bool eq_ok = equivalence.violations == 0 && equivalence.refined_slack <= 0.6 * equivalence.slack + 1e-15;
    const bool rt_ok = round_trip.ratio >= 3.0;
    const bool cf_ok = closed.sup_error_field <= 1e-4 && closed.sup_error_history <= 1e-4;
    pass = pass && eq_ok && rt_ok && cf_ok;
    body["norm_equivalence"] = io::to_json(equivalence);
    body["norm_equivalence"]["pass"] = eq_ok;
    body["round_trip"] = io::to_json(round_trip);
    body["round_trip"]["pass"] = rt_ok;
    body["closed_form"] = io::to_json(closed);
    body["closed_form"]["pass"] = cf_ok;
    body["resolvent_residual"] = io::to_json(residual);
    body["pass"] = pass;
    io::write_json(o.out / "semigroup.json", hash, body);
    if (!pass) report("semigroup battery reported violations; see semigroup.json");
    return pass ? kOk : kCheckFailed;
  });
}

int cmd_sweep(const Options& o) {
  return guarded([&] {
    const ConfigTree tree = read_config_tree(o.config);
    const RunConfig base = build_config(tree, base_dir(o.config), o.overrides);
    const std::string hash = config_hash(o.config, o.overrides);
    const auto& axes = base.sweep;

    std::vector<std::vector<double>> points{{}};
    for (const SweepAxis& a : axes) {
      std::vector<std::vector<double>> next;
      for (const auto& p : points)
        for (double v : a.values) {
          auto q = p;
          q.push_back(v);
          next.push_back(std::move(q));
        }
      points = std::move(next);
    }

    std::vector<std::string> columns{"index"};
    for (const SweepAxis& a : axes) columns.push_back(a.key);
    for (const char* c : {"status", "final_X", "final_sup", "final_E", "min_value", "iterations", "boundary_ratio",
                          "positivity", "L1_bound"})
      columns.push_back(c);

    const std::filesystem::path parts = o.out / "sweep_runs";
    std::vector<int> status(points.size(), kOk);
    tbb::parallel_for(std::size_t{0}, points.size(), [&](std::size_t i) {
      std::vector<std::string> row{std::to_string(i)};
      for (double v : points[i]) row.push_back(io::number(v));
      std::vector<std::string> tail(columns.size() - row.size(), "nan");
      status[i] = guarded([&] {
        ConfigTree t = tree;
        for (std::size_t a = 0; a < axes.size(); ++a) set_parameter(t, axes[a].key, points[i][a]);
        const RunConfig c = build_config(t, base_dir(o.config), o.overrides);
        const HistoryBuffer initial = make_initial_history(c.initial, c.grid, c.delay);
        const SolutionRecord rec = solve(c, initial, c.solver.method);
        const std::ptrdiff_t last = rec.last_level();
        const DensityField& n = rec.level(last);
        std::size_t iterations = 0;
        for (const auto& s : rec.slabs) iterations += s.iterations;
        const BoundReport pos = check_positivity(rec);
        const BoundReport l1 = check_L1_bound(rec, c.model.recruitment.r_bar());
        tail = {"0",
                io::number(norm(n, NormKind::X)),
                io::number(norm(n, NormKind::Sup)),
                io::number(norm(rec.has_ring(last) ? rec.ring_at(last) : rec.history_at(last), NormKind::E)),
                io::number(n.min()),
                std::to_string(iterations),
                io::number(rec.boundary_ratio),
                pos.pass ? "pass" : "fail",
                l1.pass ? "pass" : "fail"};
        return kOk;
      });
      if (status[i] != kOk) tail[0] = std::to_string(status[i]);
      row.insert(row.end(), tail.begin(), tail.end());
      io::CsvWriter part(parts / fmt::format("run_{:04d}.csv", i), hash, columns);
      part.row_text(row);
    });

    io::CsvWriter merged(o.out / "sweep.csv", hash, columns);
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::ifstream in(parts / fmt::format("run_{:04d}.csv", i));
      std::string line;
      std::getline(in, line);  // header comment
      std::getline(in, line);  // column names
      std::getline(in, line);
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
      merged.row_text(cells);
    }
    for (int s : status)
      if (s != kOk) return s;
    return kOk;
  });
}

int main(int argc, char** argv) {
  CLI::App app{"Size-structured population model with distributed delay: solvers and diagnostics"};
  app.set_version_flag("--version", std::string(SIZEPOP_VERSION));
  app.require_subcommand(1);

  Options o;
  std::uint64_t seed = 0;
  std::string out = ".";
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "seed for randomized checks (overrides the config)");
    sub->add_flag("--skip-checks", o.skip_checks, "run even if the assumption checkers fail");
    sub->add_option("--refine", o.overrides.refine, "refine size and delay grids by this factor")
        ->check(CLI::PositiveNumber);
  };
  CLI::App* run = app.add_subcommand("run", "run the configured solver and diagnostics");
  CLI::App* compare = app.add_subcommand("compare", "compare both solvers and their refinement");
  CLI::App* semi = app.add_subcommand("semigroup-check", "resolvent and norm-equivalence batteries");
  CLI::App* sweep = app.add_subcommand("sweep", "Cartesian parameter sweep");
  CLI::App* verify = app.add_subcommand("verify-assumptions", "check the coefficient and kernel hypotheses");
  for (CLI::App* s : {run, compare, semi, sweep, verify}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigInvalid;
  }
  o.out = out;
  for (CLI::App* s : {run, compare, semi, sweep, verify})
    if (s->parsed() && s->count("--seed") > 0) o.overrides.seed = seed;

  std::optional<tbb::global_control> threads;
  if (const char* env = std::getenv("SIZEPOP_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) {
      report(fmt::format("SIZEPOP_THREADS must be a positive integer, got '{}'", env));
      return kConfigInvalid;
    }
    threads.emplace(tbb::global_control::max_allowed_parallelism, static_cast<std::size_t>(n));
  }

  if (run->parsed()) return cmd_run(o);
  if (compare->parsed()) return cmd_compare(o);
  if (semi->parsed()) return cmd_semigroup_check(o);
  if (sweep->parsed()) return cmd_sweep(o);
  return cmd_verify_assumptions(o);
}

}  // namespace sizepop::cli
