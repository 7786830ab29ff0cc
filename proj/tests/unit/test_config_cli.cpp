#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "sizepop/cli.hpp"
#include "sizepop/config.hpp"
#include "sizepop/errors.hpp"

using namespace sizepop;
using namespace sizepop::testing;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("sizepop_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "sizepop");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

/// Data rows of a CSV written by the tool: header comment, column line, then values.
struct Csv {
  std::string header;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw std::runtime_error("missing column " + name);
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Csv read_csv(const fs::path& p) {
  std::ifstream in(p);
  Csv csv;
  std::getline(in, csv.header);
  std::string line;
  std::getline(in, line);
  csv.columns = split(line);
  while (std::getline(in, line))
    if (!line.empty()) csv.rows.push_back(split(line));
  return csv;
}

nlohmann::ordered_json read_json(const fs::path& p) { return nlohmann::ordered_json::parse(read_text(p)); }

}  // namespace

TEST_CASE("config parse errors") {
  CHECK_THROWS_AS(parse_config_text("[grid\nx_max = 1\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);

  const std::string base = read_text(config_path("decay.ini"));
  CHECK_NOTHROW(build_config(parse_config_text(base)));
  CHECK_THROWS_AS(build_config(parse_config_text(base + "\n[bogus]\nx = 1\n")), ConfigError);
  CHECK_THROWS_AS(build_config(parse_config_text(base + "\n[solver]\nunknown_key = 1\n")), ConfigError);

  auto tree = parse_config_text(base);
  set_parameter(tree, "delay.tau", 0.0);
  CHECK_THROWS_AS(build_config(tree), ConfigError);
  tree = parse_config_text(base);
  set_parameter(tree, "grid.cells", -5.0);
  CHECK_THROWS_AS(build_config(tree), ConfigError);
  tree = parse_config_text(base);
  tree.put("semigroup.lambdas", "0.5, 0");
  CHECK_THROWS_AS(build_config(tree), ConfigError);
  tree = parse_config_text(base);
  tree.put("coefficients.growth", "exotic");
  CHECK_THROWS_AS(build_config(tree), ConfigError);
}

TEST_CASE("config values and overrides") {
  RunConfig c = load_config(config_path("desk_renewal.ini"));
  CHECK(c.grid.cells() == 350);
  CHECK(c.grid.x_max() == 14.0);
  CHECK(c.delay.tau() == 1.0);
  CHECK(c.delay.intervals() == 50);
  CHECK(c.solver.method == "characteristics");
  CHECK(c.solver.horizon == 2.0);
  CHECK(c.diagnostics.dependence);
  CHECK(c.model.recruitment.r_bar() == doctest::Approx(4.5));

  Overrides o;
  o.refine = 2;
  o.seed = 99;
  RunConfig r = load_config(config_path("desk_renewal.ini"), o);
  CHECK(r.grid.cells() == 700);
  CHECK(r.delay.intervals() == 100);
  CHECK(r.semigroup.seed == 99);
  CHECK(r.diagnostics.seed == 99);

  RunConfig s = load_config(config_path("sweep.ini"));
  REQUIRE(s.sweep.size() == 2);
  CHECK(s.sweep[0].values.size() == 2);
}

TEST_CASE("run on the zero config writes all-zero outputs") {
  auto out = scratch("zero");
  CHECK(invoke({"run", "--config", config_path("zero.ini"), "--out", out.string()}) == cli::kOk);
  auto dens = read_csv(out / "densities.csv");
  CHECK(dens.header.rfind("# sizepop 0.1.0 config_sha256=", 0) == 0);
  REQUIRE_FALSE(dens.rows.empty());
  const auto n = dens.column("n");
  for (const auto& row : dens.rows) CHECK(std::stod(row[n]) == 0.0);
  auto norms = read_csv(out / "norms.csv");
  for (const auto& row : norms.rows)
    for (std::size_t c = 1; c < row.size(); ++c) CHECK(std::stod(row[c]) == 0.0);
  auto summary = read_json(out / "summary.json");
  CHECK(summary.begin().key() == "header");
  CHECK(summary["status"] == "ok");
}

TEST_CASE("run on the decay config follows the exponential decay") {
  auto out = scratch("decay");
  CHECK(invoke({"run", "--config", config_path("decay.ini"), "--out", out.string()}) == cli::kOk);
  auto norms = read_csv(out / "norms.csv");
  const auto t = norms.column("t"), x = norms.column("X");
  const double x0 = std::stod(norms.rows.front()[x]);
  for (const auto& row : norms.rows) {
    const double expected = x0 * std::exp(-0.5 * std::stod(row[t]));
    CHECK(std::abs(std::stod(row[x]) - expected) <= 1e-3 * expected);
  }
  CHECK(fs::exists(out / "margins.csv"));
}

TEST_CASE("invalid inputs map to the config exit code") {
  auto dir = scratch("invalid");
  std::string text = read_text(config_path("decay.ini"));
  const auto pos = text.find("tau = 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 7, "tau = 0");
  write_text(dir / "bad_tau.ini", text);
  CHECK(invoke({"run", "--config", (dir / "bad_tau.ini").string(), "--out", dir.string()}) == cli::kConfigInvalid);

  std::string battery = read_text(config_path("semigroup.ini"));
  const auto at = battery.find("lambdas");
  REQUIRE(at != std::string::npos);
  battery.replace(at, battery.find('\n', at) - at, "lambdas = 0, 1");
  write_text(dir / "bad_lambda.ini", battery);
  CHECK(invoke({"semigroup-check", "--config", (dir / "bad_lambda.ini").string(), "--out", dir.string()}) ==
        cli::kConfigInvalid);
  CHECK(invoke({"run", "--config", config_path("decay.ini"), "--no-such-flag"}) == cli::kConfigInvalid);
}

TEST_CASE("solver failures map to the solver exit code") {
  auto dir = scratch("cfl");
  std::string text = read_text(config_path("decay.ini"));
  text.replace(text.find("intervals = 100"), 15, "intervals = 20");
  text.replace(text.find("method = characteristics"), 24, "method = upwind");
  write_text(dir / "cfl.ini", text);
  CHECK(invoke({"run", "--config", (dir / "cfl.ini").string(), "--out", dir.string()}) == cli::kSolverFailed);
}

TEST_CASE("compare on the zero and decay configs") {
  auto zero = scratch("compare_zero");
  CHECK(invoke({"compare", "--config", config_path("zero.ini"), "--out", zero.string()}) == cli::kOk);
  auto z = read_json(zero / "compare.json");
  CHECK(z["final_difference"].get<double>() == 0.0);

  auto decay = scratch("compare_decay");
  CHECK(invoke({"compare", "--config", config_path("decay.ini"), "--out", decay.string()}) == cli::kOk);
  auto d = read_json(decay / "compare.json");
  CHECK(d["final_difference"].get<double>() <= 1e-2);
  CHECK(d["decreasing"].get<bool>());
}

TEST_CASE("a one-point sweep reproduces a run") {
  auto dir = scratch("sweep_one");
  write_text(dir / "one.ini", read_text(config_path("decay.ini")) + "\n[sweep]\ncoefficients.mu_value = 0.5\n");
  CHECK(invoke({"sweep", "--config", (dir / "one.ini").string(), "--out", (dir / "sweep").string()}) == cli::kOk);
  CHECK(invoke({"run", "--config", config_path("decay.ini"), "--out", (dir / "run").string()}) == cli::kOk);
  auto sweep = read_csv(dir / "sweep" / "sweep.csv");
  REQUIRE(sweep.rows.size() == 1);
  auto summary = read_json(dir / "run" / "summary.json");
  CHECK(std::stod(sweep.rows[0][sweep.column("final_X")]) == summary["record"]["final"]["X"].get<double>());
  CHECK(std::stod(sweep.rows[0][sweep.column("final_sup")]) == summary["record"]["final"]["sup"].get<double>());
  CHECK(sweep.rows[0][sweep.column("status")] == "0");
}

TEST_CASE("a two-by-two sweep emits four rows") {
  auto dir = scratch("sweep_four");
  write_text(dir / "four.ini", read_text(config_path("decay.ini")) +
                                   "\n[sweep]\ncoefficients.mu_value = 0.25, 0.5\ninitial.center = 4, 5\n");
  CHECK(invoke({"sweep", "--config", (dir / "four.ini").string(), "--out", dir.string()}) == cli::kOk);
  auto sweep = read_csv(dir / "sweep.csv");
  CHECK(sweep.rows.size() == 4);
  CHECK(sweep.column("coefficients.mu_value") == 1);
}

TEST_CASE("verify-assumptions passes on the desk config") {
  auto out = scratch("verify");
  CHECK(invoke({"verify-assumptions", "--config", config_path("desk_renewal.ini"), "--out", out.string()}) == cli::kOk);
  auto j = read_json(out / "assumptions.json");
  CHECK(j["checks"]["pass"].get<bool>());
}
