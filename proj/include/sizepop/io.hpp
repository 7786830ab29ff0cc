#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sizepop/assumptions.hpp"
#include "sizepop/diagnostics.hpp"
#include "sizepop/record.hpp"
#include "sizepop/semigroup.hpp"

namespace sizepop::io {

using Json = nlohmann::ordered_json;

std::string sha256_hex(std::string_view data);

/// "# sizepop <version> config_sha256=<hex>"
std::string header_line(const std::string& config_hash);

/// 17 significant digits, '.' radix; non-finite values print as inf, -inf, nan.
std::string number(double v);
/// Finite doubles stay numbers; non-finite ones become the strings of number().
Json json_number(double v);

/// Header line, column row, then rows written with number().
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& config_hash, const std::vector<std::string>& columns);

  void row(const std::vector<double>& values);
  /// Pre-formatted cells.
  void row_text(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::size_t columns_;
};

/// Pretty-printed JSON whose first member is the header line.
void write_json(const std::filesystem::path& path, const std::string& config_hash, const Json& body);

/// (t, x, n) rows for levels 0, every, 2 every, ... and the last level.
void write_densities(const std::filesystem::path& path, const std::string& config_hash, const SolutionRecord& record,
                     std::size_t every);
/// (t, X, Y, sup, E) per level k >= 0; E is taken on the history segment anchored at t_k.
void write_norms(const std::filesystem::path& path, const std::string& config_hash, const SolutionRecord& record);
/// (check, t, observed, bound, margin) for every report.
void write_margins(const std::filesystem::path& path, const std::string& config_hash,
                   const std::vector<BoundReport>& reports);

Json to_json(const ConditionResult& c);
Json to_json(const AssumptionReport& r);
Json to_json(const A5Result& r);
/// Summary of a bound check without its curve.
Json to_json(const BoundReport& r);
Json to_json(const IdentityReport& r);
Json to_json(const DependenceReport& r);
Json to_json(const SlabReport& s);
Json to_json(const ContractionSummary& s);
Json to_json(const NormEquivalenceSummary& s);
Json to_json(const RefinementSummary& s);
Json to_json(const ClosedFormSummary& s);

}  // namespace sizepop::io
