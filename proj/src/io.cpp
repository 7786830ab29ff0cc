#include "sizepop/io.hpp"

#include <cmath>
#include <memory>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "sizepop/errors.hpp"
#include "sizepop/operators.hpp"

namespace sizepop::io {

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("sha256: digest failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string header_line(const std::string& config_hash) {
  return fmt::format("# sizepop {} config_sha256={}", SIZEPOP_VERSION, config_hash);
}

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

Json json_number(double v) {
  if (std::isfinite(v)) return v;
  return number(v);
}

namespace {

std::ofstream open(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

Json parameters(const std::map<std::string, double>& p) {
  Json j = Json::object();
  for (const auto& [k, v] : p) j[k] = json_number(v);
  return j;
}

}  // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& config_hash,
                     const std::vector<std::string>& columns)
    : out_(open(path)), columns_(columns.size()) {
  out_ << header_line(config_hash) << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(number(v));
  row_text(cells);
}

void CsvWriter::row_text(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw std::logic_error("csv: row width does not match the header");
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
  out_ << '\n';
}

void write_json(const std::filesystem::path& path, const std::string& config_hash, const Json& body) {
  Json doc = Json::object();
  doc["header"] = header_line(config_hash);
  for (const auto& [k, v] : body.items()) doc[k] = v;
  std::ofstream out = open(path);
  out << doc.dump(2) << '\n';
}

void write_densities(const std::filesystem::path& path, const std::string& config_hash, const SolutionRecord& record,
                     std::size_t every) {
  CsvWriter csv(path, config_hash, {"t", "x", "n"});
  const std::ptrdiff_t last = record.last_level();
  const auto stride = static_cast<std::ptrdiff_t>(std::max<std::size_t>(every, 1));
  for (std::ptrdiff_t k = 0; k <= last; ++k) {
    if (k % stride != 0 && k != last) continue;
    const DensityField& n = record.level(k);
    const double t = record.time(k);
    for (std::size_t i = 0; i < n.size(); ++i) csv.row({t, n.grid().node(i), n[i]});
  }
}

void write_norms(const std::filesystem::path& path, const std::string& config_hash, const SolutionRecord& record) {
  CsvWriter csv(path, config_hash, {"t", "X", "Y", "sup", "E"});
  for (std::ptrdiff_t k = 0; k <= record.last_level(); ++k) {
    const DensityField& n = record.level(k);
    const double e = record.has_ring(k) ? norm(record.ring_at(k), NormKind::E) : norm(record.history_at(k), NormKind::E);
    csv.row({record.time(k), norm(n, NormKind::X), norm(n, NormKind::Y), norm(n, NormKind::Sup), e});
  }
}

void write_margins(const std::filesystem::path& path, const std::string& config_hash,
                   const std::vector<BoundReport>& reports) {
  CsvWriter csv(path, config_hash, {"check", "t", "observed", "bound", "margin"});
  for (const BoundReport& r : reports)
    for (const BoundPoint& p : r.points)
      csv.row_text({r.name, number(p.t), number(p.observed), number(p.bound), number(p.margin)});
}

Json to_json(const ConditionResult& c) {
  Json j;
  j["name"] = c.name;
  j["pass"] = c.pass;
  j["observed"] = json_number(c.observed);
  j["declared"] = json_number(c.declared);
  j["x"] = json_number(c.x);
  j["second"] = json_number(c.second);
  if (!c.detail.empty()) j["detail"] = c.detail;
  return j;
}

Json to_json(const AssumptionReport& r) {
  Json j;
  j["pass"] = r.pass();
  j["conditions"] = Json::array();
  for (const auto& c : r.conditions) j["conditions"].push_back(to_json(c));
  return j;
}

Json to_json(const A5Result& r) {
  Json j;
  j["pass"] = r.pass;
  j["worst"] = json_number(r.worst);
  j["x"] = json_number(r.x);
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

Json to_json(const BoundReport& r) {
  Json j;
  j["name"] = r.name;
  j["branch"] = r.branch;
  j["informative"] = r.informative;
  j["pass"] = r.pass;
  j["strict"] = r.strict;
  j["min_margin"] = json_number(r.min_margin);
  j["levels"] = r.points.size();
  if (!r.points.empty()) {
    j["final_observed"] = json_number(r.points.back().observed);
    j["final_bound"] = json_number(r.points.back().bound);
  }
  j["parameters"] = parameters(r.parameters);
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

Json to_json(const IdentityReport& r) {
  Json j;
  j["pass"] = r.pass;
  j["levels_checked"] = r.levels_checked;
  j["shifted_checks"] = r.shifted_checks;
  j["spot_checks"] = r.spot_checks;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

Json to_json(const DependenceReport& r) {
  Json j;
  j["pass"] = r.pass;
  j["max_spread"] = json_number(r.max_spread);
  j["epsilons"] = Json::array();
  for (double e : r.epsilons) j["epsilons"].push_back(json_number(e));
  j["final_ratios"] = Json::array();
  for (const auto& row : r.ratios) j["final_ratios"].push_back(json_number(row.empty() ? 0.0 : row.back()));
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

Json to_json(const SlabReport& s) {
  Json j;
  j["first_level"] = s.first_level;
  j["last_level"] = s.last_level;
  j["iterations"] = s.iterations;
  j["final_residual"] = json_number(s.residuals.empty() ? 0.0 : s.residuals.back());
  return j;
}

Json to_json(const ContractionSummary& s) {
  Json j;
  j["lambda"] = json_number(s.lambda);
  j["draws"] = s.draws;
  j["violations"] = s.violations;
  j["component_violations"] = s.component_violations;
  j["min_margin"] = json_number(s.min_margin);
  j["min_component_margin"] = json_number(s.min_component_margin);
  j["max_residual"] = json_number(s.max_residual);
  return j;
}

Json to_json(const NormEquivalenceSummary& s) {
  Json j;
  j["draws"] = s.draws;
  j["violations"] = s.violations;
  j["lower_constant"] = json_number(s.lower_constant);
  j["min_ratio"] = json_number(s.min_ratio);
  j["max_ratio"] = json_number(s.max_ratio);
  j["slack"] = json_number(s.slack);
  j["refined_slack"] = json_number(s.refined_slack);
  return j;
}

Json to_json(const RefinementSummary& s) {
  Json j;
  j["coarse_error"] = json_number(s.coarse_error);
  j["fine_error"] = json_number(s.fine_error);
  j["ratio"] = json_number(s.ratio);
  return j;
}

Json to_json(const ClosedFormSummary& s) {
  Json j;
  j["sup_error_field"] = json_number(s.sup_error_field);
  j["sup_error_history"] = json_number(s.sup_error_history);
  j["residual"] = json_number(s.residual);
  return j;
}

}  // namespace sizepop::io
