#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cycleflow::report {

inline constexpr const char* kSchema = "cycleflow/1";

struct ModelInfo {
  std::string kind;
  std::string name;
  std::string hash;  // FNV-1a 64 of the model file bytes, hex

  friend bool operator==(const ModelInfo&, const ModelInfo&) = default;
};

enum class Relation {
  at_most,   // value <= threshold
  at_least,  // value >= threshold
  below,     // value <  threshold
};

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  Relation relation = Relation::at_most;
  bool pass = false;

  friend bool operator==(const Check&, const Check&) = default;
};

/// Builds a check and evaluates it; NaN values fail.
Check make_check(std::string name, double value, double threshold, Relation relation = Relation::at_most);

struct SuiteReport {
  std::string schema = kSchema;
  std::string command;
  ModelInfo model;
  std::vector<Check> checks;
  std::map<std::string, std::vector<double>> values;
  std::map<std::string, std::string> notes;
  std::uint64_t seed = 0;
  std::optional<double> elapsed_seconds;  // serialized only on request

  bool passed() const;
  void add(Check check) { checks.push_back(std::move(check)); }

  friend bool operator==(const SuiteReport&, const SuiteReport&) = default;
};

enum class Format { json, csv, text };

Format parse_format(const std::string& name);

/// Canonical JSON: sorted keys, two-space indent, floats with 17 significant
/// digits, non-finite floats as the strings "Infinity", "-Infinity", "NaN".
std::string to_json(const SuiteReport& report, bool include_timing = false);
SuiteReport from_json(const std::string& text);

/// Header plus one row per check.
std::string to_csv(const SuiteReport& report);
std::string to_text(const SuiteReport& report);
std::string render(const SuiteReport& report, Format format, bool include_timing = false);

/// Writes the rendering to `path` ("-" for stdout); unwritable paths raise ErrorCode::io.
void emit_report(const SuiteReport& report, Format format, const std::filesystem::path& path,
                 bool include_timing = false);

/// 17-significant-digit rendering used throughout the reports.
std::string format_double(double value);

}  // namespace cycleflow::report
