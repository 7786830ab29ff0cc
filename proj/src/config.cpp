#include "sizepop/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <fmt/format.h>

#include "sizepop/errors.hpp"

namespace sizepop {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"grid", {"x_max", "cells"}},
      {"delay", {"tau", "intervals"}},
      {"coefficients",
       {"growth", "gamma_value", "gamma_base", "gamma_delta", "gamma_coupling", "gamma_scale", "mortality", "mu_value",
        "mu_base", "mu_sat", "K"}},
      {"environment", {"family", "amplitude", "width"}},
      {"recruitment",
       {"family", "amplitude", "birth_scale", "decay", "fertility", "env_coupling", "size_coupling"}},
      {"initial", {"family", "mass", "shape", "scale", "center", "width", "time_profile", "rate", "csv"}},
      {"solver", {"method", "horizon", "tol", "max_iter", "snapshot_every"}},
      {"diagnostics",
       {"enabled", "dependence", "epsilons", "bump_center", "bump_width", "seed", "spot_checks", "sample_budget"}},
      {"semigroup",
       {"x_max", "cells", "tau", "intervals", "seed", "resolvent_draws", "norm_draws", "lambdas", "component_tol",
        "norm_slack"}},
      {"sweep", {}},
  };
  return s;
}

const std::set<std::string> kTextKeys{"coefficients.growth", "coefficients.mortality", "environment.family",
                                      "recruitment.family",  "recruitment.fertility",  "initial.family",
                                      "initial.time_profile", "initial.csv",           "solver.method",
                                      "diagnostics.epsilons", "semigroup.lambdas"};

class Reader {
 public:
  Reader(const ConfigTree& tree, std::string section) : section_(std::move(section)) {
    if (auto child = tree.get_child_optional(section_)) node_ = &*child;
  }

  bool has(const std::string& key) const { return node_ && node_->get_child_optional(pt::path(key, '/')); }

  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    return boost::trim_copy(node_->get<std::string>(pt::path(key, '/')));
  }

  template <class T>
  T value(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    const std::string raw = text(key, "");
    try {
      return boost::lexical_cast<T>(raw);
    } catch (const boost::bad_lexical_cast&) {
      throw ConfigError(fmt::format("[{}] {}: cannot parse '{}'", section_, key, raw));
    }
  }

  double real(const std::string& key, double fallback) const {
    const double v = value<double>(key, fallback);
    if (!std::isfinite(v)) throw ConfigError(fmt::format("[{}] {}: value must be finite", section_, key));
    return v;
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    const std::string raw = text(key, "");
    if (has(key) && raw.starts_with('-'))
      throw ConfigError(fmt::format("[{}] {}: must be a non-negative integer", section_, key));
    return value<std::size_t>(key, fallback);
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string raw = boost::to_lower_copy(text(key, ""));
    if (raw == "true" || raw == "yes" || raw == "1" || raw == "on") return true;
    if (raw == "false" || raw == "no" || raw == "0" || raw == "off") return false;
    throw ConfigError(fmt::format("[{}] {}: expected a boolean, got '{}'", section_, key, raw));
  }

  std::vector<double> list(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    return parse_list(section_ + "." + key, text(key, ""));
  }

  static std::vector<double> parse_list(const std::string& where, const std::string& raw) {
    std::vector<std::string> parts;
    boost::split(parts, raw, boost::is_any_of(","));
    std::vector<double> out;
    for (auto& p : parts) {
      boost::trim(p);
      if (p.empty()) continue;
      try {
        out.push_back(boost::lexical_cast<double>(p));
      } catch (const boost::bad_lexical_cast&) {
        throw ConfigError(fmt::format("{}: cannot parse list entry '{}'", where, p));
      }
    }
    if (out.empty()) throw ConfigError(fmt::format("{}: empty list", where));
    return out;
  }

 private:
  std::string section_;
  const ConfigTree* node_ = nullptr;
};

void check_schema(const ConfigTree& tree) {
  for (const auto& [section, body] : tree) {
    auto it = schema().find(section);
    if (it == schema().end()) throw ConfigError(fmt::format("unknown section [{}]", section));
    if (section == "sweep") continue;
    for (const auto& [key, value] : body) {
      if (!it->second.contains(key)) throw ConfigError(fmt::format("[{}]: unknown key '{}'", section, key));
    }
  }
}

growth::Law growth_law(const Reader& r, double K) {
  const std::string family = r.text("growth", "constant");
  if (family == "constant") return growth::constant(r.real("gamma_value", 1.0));
  if (family == "saturating")
    return growth::saturating(r.real("gamma_base", 0.5), r.real("gamma_delta", 0.5), r.real("gamma_coupling", 1.0), K);
  if (family == "size_decline")
    return growth::size_decline(r.real("gamma_base", 0.5), r.real("gamma_delta", 0.5), r.real("gamma_scale", 1.0),
                                r.real("gamma_coupling", 0.0), K);
  throw ConfigError("[coefficients] growth: unknown family '" + family + "' (expected constant|saturating|size_decline)");
}

mortality::Law mortality_law(const Reader& r, double K) {
  const std::string family = r.text("mortality", "constant");
  if (family == "constant") return mortality::constant(r.real("mu_value", 0.0));
  if (family == "saturating") return mortality::saturating(r.real("mu_base", 0.1), r.real("mu_sat", 0.1), K);
  throw ConfigError("[coefficients] mortality: unknown family '" + family + "' (expected constant|saturating)");
}

EnvironmentKernel environment_kernel(const Reader& r) {
  const std::string family = r.text("family", "constant");
  const double amp = r.real("amplitude", 0.0);
  if (amp < 0.0) throw ConfigError("[environment] amplitude must be non-negative");
  if (family == "constant") return EnvironmentKernel::constant(amp);
  if (family == "gaussian") return EnvironmentKernel::gaussian(amp, r.real("width", 1.0));
  if (family == "hierarchy_step") return EnvironmentKernel::hierarchy_step(amp);
  throw ConfigError("[environment] family: unknown '" + family + "' (expected constant|gaussian|hierarchy_step)");
}

RecruitmentKernel recruitment_kernel(const Reader& r) {
  const std::string family = r.text("family", "zero");
  if (family == "zero") return RecruitmentKernel::zero();
  const double amp = r.real("amplitude", 1.0);
  const double birth = r.real("birth_scale", 0.5);
  const double decay = r.real("decay", 0.0);
  const std::string fert = r.text("fertility", "constant");
  const double coupling = r.real("env_coupling", 0.0);
  if (family == "separable_exponential")
    return RecruitmentKernel::separable_exponential(amp, birth, decay, fert, coupling);
  if (family == "parent_scaled")
    return RecruitmentKernel::parent_scaled(amp, birth, r.real("size_coupling", 0.5), decay, fert, coupling);
  throw ConfigError("[recruitment] family: unknown '" + family + "' (expected zero|separable_exponential|parent_scaled)");
}

InitialSpec initial_spec(const Reader& r, const std::string& base_dir) {
  InitialSpec s;
  s.family = r.text("family", "zero");
  s.mass = r.real("mass", s.mass);
  s.shape = r.real("shape", s.shape);
  s.scale = r.real("scale", s.scale);
  s.center = r.real("center", s.center);
  s.width = r.real("width", s.width);
  s.time_profile = r.text("time_profile", s.time_profile);
  s.rate = r.real("rate", s.rate);
  if (s.family == "csv") {
    const std::string path = r.text("csv", "");
    if (path.empty()) throw ConfigError("[initial] family = csv requires a csv path");
    const std::filesystem::path p(path);
    s.csv_path = p.is_absolute() ? p.string() : (std::filesystem::path(base_dir) / p).string();
  }
  return s;
}

std::vector<SweepAxis> sweep_axes(const ConfigTree& tree) {
  std::vector<SweepAxis> axes;
  auto node = tree.get_child_optional("sweep");
  if (!node) return axes;
  for (const auto& [key, value] : *node) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw ConfigError("[sweep] " + key + ": expected section.key");
    const std::string section = key.substr(0, dot), name = key.substr(dot + 1);
    auto it = schema().find(section);
    if (it == schema().end() || section == "sweep" || !it->second.contains(name) || kTextKeys.contains(key))
      throw ConfigError("[sweep] " + key + ": not a numeric configuration key");
    axes.push_back({key, Reader::parse_list("sweep." + key, value.get_value<std::string>())});
  }
  return axes;
}

}  // namespace

ConfigTree parse_config_text(const std::string& text) {
  ConfigTree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  return tree;
}

ConfigTree read_config_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

RunConfig build_config(const ConfigTree& tree, const std::string& base_dir, const Overrides& overrides) {
  check_schema(tree);
  if (overrides.refine == 0) throw ConfigError("--refine must be a positive integer");
  RunConfig c;
  try {
    const Reader grid(tree, "grid"), delay(tree, "delay"), coef(tree, "coefficients"), env(tree, "environment"),
        rec(tree, "recruitment"), init(tree, "initial"), solver(tree, "solver"), diag(tree, "diagnostics"),
        semi(tree, "semigroup");

    c.grid = SizeGrid(grid.real("x_max", 10.0), grid.count("cells", 500)).refined(overrides.refine);
    c.delay = DelayGrid(delay.real("tau", 1.0), delay.count("intervals", 50)).refined(overrides.refine);

    const double K = coef.real("K", 10.0);
    if (!(K > 0.0)) throw ConfigError("[coefficients] K must be positive");
    c.model.coefficients = make_coefficients(growth_law(coef, K), mortality_law(coef, K), K);
    c.model.environment = environment_kernel(env);
    c.model.recruitment = recruitment_kernel(rec);
    c.initial = initial_spec(init, base_dir);

    c.solver.method = solver.text("method", c.solver.method);
    if (c.solver.method != "characteristics" && c.solver.method != "upwind")
      throw ConfigError("[solver] method: unknown '" + c.solver.method + "' (expected characteristics|upwind)");
    c.solver.horizon = solver.real("horizon", c.solver.horizon);
    if (!(c.solver.horizon > 0.0)) throw ConfigError("[solver] horizon must be positive");
    c.solver.picard.tol = solver.real("tol", c.solver.picard.tol);
    c.solver.picard.max_iter = solver.count("max_iter", c.solver.picard.max_iter);
    if (!(c.solver.picard.tol > 0.0) || c.solver.picard.max_iter == 0)
      throw ConfigError("[solver] tol and max_iter must be positive");
    c.solver.snapshot_every = solver.count("snapshot_every", c.solver.snapshot_every);
    if (c.solver.snapshot_every == 0) throw ConfigError("[solver] snapshot_every must be positive");

    auto& d = c.diagnostics;
    d.enabled = diag.flag("enabled", d.enabled);
    d.dependence = diag.flag("dependence", d.dependence);
    d.epsilons = diag.list("epsilons", d.epsilons);
    for (double e : d.epsilons)
      if (!(e > 0.0)) throw ConfigError("[diagnostics] epsilons must be positive");
    d.bump_center = diag.real("bump_center", d.bump_center);
    d.bump_width = diag.real("bump_width", d.bump_width);
    if (!(d.bump_width > 0.0)) throw ConfigError("[diagnostics] bump_width must be positive");
    d.seed = diag.value<std::uint64_t>("seed", d.seed);
    d.spot_checks = diag.count("spot_checks", d.spot_checks);
    d.sample_budget = diag.count("sample_budget", d.sample_budget);
    if (d.sample_budget == 0) throw ConfigError("[diagnostics] sample_budget must be positive");

    auto& s = c.semigroup;
    s.x_max = semi.real("x_max", s.x_max);
    s.cells = semi.count("cells", s.cells);
    s.tau = semi.real("tau", s.tau);
    s.intervals = semi.count("intervals", s.intervals);
    SizeGrid(s.x_max, s.cells);
    DelayGrid(s.tau, s.intervals);
    s.seed = semi.value<std::uint64_t>("seed", s.seed);
    s.resolvent_draws = semi.count("resolvent_draws", s.resolvent_draws);
    s.norm_draws = semi.count("norm_draws", s.norm_draws);
    s.lambdas = semi.list("lambdas", s.lambdas);
    for (double l : s.lambdas)
      if (!(l > 0.0)) throw ConfigError(fmt::format("[semigroup] lambdas: resolvent parameter must be positive, got {}", l));
    s.component_tol = semi.real("component_tol", s.component_tol);
    s.norm_slack = semi.real("norm_slack", s.norm_slack);

    if (overrides.seed) {
      s.seed = *overrides.seed;
      d.seed = *overrides.seed;
    }
    c.sweep = sweep_axes(tree);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path, const Overrides& overrides) {
  const ConfigTree tree = read_config_tree(path);
  const auto parent = std::filesystem::path(path).parent_path();
  RunConfig c = build_config(tree, parent.empty() ? "." : parent.string(), overrides);
  c.name = std::filesystem::path(path).stem().string();
  return c;
}

void set_parameter(ConfigTree& tree, const std::string& key, double value) {
  const auto dot = key.find('.');
  if (dot == std::string::npos) throw ConfigError("parameter '" + key + "': expected section.key");
  const std::string section = key.substr(0, dot), name = key.substr(dot + 1);
  ConfigTree& node = tree.get_child_optional(section) ? tree.get_child(section) : tree.put_child(section, ConfigTree());
  node.put(pt::path(name, '/'), fmt::format("{:.17g}", value));
}

}  // namespace sizepop
