#include "cycleflow/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "cycleflow/error.hpp"

namespace cycleflow::report {

using nlohmann::json;

namespace {

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::at_most: return "<=";
    case Relation::at_least: return ">=";
    case Relation::below: return "<";
  }
  return "?";
}

Relation parse_relation(const std::string& s) {
  if (s == "<=") return Relation::at_most;
  if (s == ">=") return Relation::at_least;
  if (s == "<") return Relation::below;
  throw Error(ErrorCode::parse, "unknown relation '" + s + "'");
}

json number(double x) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "Infinity" : "-Infinity";
  return x;
}

double read_number(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-Infinity") return -std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::parse, "expected a number, got '" + s + "'");
  }
  return v.get<double>();
}

void write(std::ostream& out, const json& v, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * depth), ' ');
  const std::string inner(static_cast<std::size_t>(2 * depth + 2), ' ');
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        out << "{}";
        return;
      }
      out << "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {  // std::map: keys sorted
        if (!first) out << ",\n";
        first = false;
        out << inner << json(it.key()).dump() << ": ";
        write(out, it.value(), depth + 1);
      }
      out << "\n" << pad << "}";
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        out << "[]";
        return;
      }
      // Numeric arrays on one line.
      bool scalars = true;
      for (const auto& e : v) scalars = scalars && !e.is_structured();
      if (scalars) {
        out << "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i) out << ", ";
          write(out, v[i], depth + 1);
        }
        out << "]";
        return;
      }
      out << "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ",\n";
        out << inner;
        write(out, v[i], depth + 1);
      }
      out << "\n" << pad << "]";
      return;
    }
    case json::value_t::number_float: out << format_double(v.get<double>()); return;
    default: out << v.dump(); return;
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

Check make_check(std::string name, double value, double threshold, Relation relation) {
  bool pass = false;
  if (!std::isnan(value)) {
    switch (relation) {
      case Relation::at_most: pass = value <= threshold; break;
      case Relation::at_least: pass = value >= threshold; break;
      case Relation::below: pass = value < threshold; break;
    }
  }
  return {std::move(name), value, threshold, relation, pass};
}

bool SuiteReport::passed() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

Format parse_format(const std::string& name) {
  if (name == "json") return Format::json;
  if (name == "csv") return Format::csv;
  if (name == "text") return Format::text;
  throw Error(ErrorCode::precondition, "unknown output format '" + name + "'");
}

std::string to_json(const SuiteReport& report, bool include_timing) {
  json doc = json::object();
  doc["schema"] = report.schema;
  doc["command"] = report.command;
  doc["model"] = {{"kind", report.model.kind}, {"name", report.model.name}, {"hash", report.model.hash}};
  doc["seed"] = report.seed;
  doc["passed"] = report.passed();
  json checks = json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name},
                      {"value", number(c.value)},
                      {"threshold", number(c.threshold)},
                      {"relation", relation_name(c.relation)},
                      {"pass", c.pass}});
  doc["checks"] = checks;
  json values = json::object();
  for (const auto& [k, v] : report.values) {
    json arr = json::array();
    for (double x : v) arr.push_back(number(x));
    values[k] = arr;
  }
  doc["values"] = values;
  doc["notes"] = report.notes;
  if (include_timing && report.elapsed_seconds) doc["elapsed_seconds"] = number(*report.elapsed_seconds);
  std::ostringstream out;
  write(out, doc, 0);
  out << "\n";
  return out.str();
}

SuiteReport from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, e.what());
  }
  SuiteReport r;
  try {
    r.schema = doc.at("schema").get<std::string>();
    r.command = doc.at("command").get<std::string>();
    r.model.kind = doc.at("model").at("kind").get<std::string>();
    r.model.name = doc.at("model").at("name").get<std::string>();
    r.model.hash = doc.at("model").at("hash").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& c : doc.at("checks"))
      r.checks.push_back({c.at("name").get<std::string>(), read_number(c.at("value")),
                          read_number(c.at("threshold")), parse_relation(c.at("relation").get<std::string>()),
                          c.at("pass").get<bool>()});
    for (auto it = doc.at("values").begin(); it != doc.at("values").end(); ++it) {
      std::vector<double> v;
      for (const auto& x : it.value()) v.push_back(read_number(x));
      r.values[it.key()] = std::move(v);
    }
    r.notes = doc.at("notes").get<std::map<std::string, std::string>>();
    if (doc.contains("elapsed_seconds")) r.elapsed_seconds = read_number(doc.at("elapsed_seconds"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string to_csv(const SuiteReport& report) {
  std::ostringstream out;
  out << "check,value,threshold,relation,pass\n";
  for (const auto& c : report.checks)
    out << c.name << "," << format_double(c.value) << "," << format_double(c.threshold) << ","
        << relation_name(c.relation) << "," << (c.pass ? "true" : "false") << "\n";
  return out.str();
}

std::string to_text(const SuiteReport& report) {
  std::ostringstream out;
  out << report.command << " " << report.model.name << " [" << report.model.kind << ", " << report.model.hash
      << "] seed=" << report.seed << "\n";
  std::size_t width = 5;
  for (const auto& c : report.checks) width = std::max(width, c.name.size());
  for (const auto& c : report.checks) {
    char line[256];
    std::snprintf(line, sizeof line, "  %-4s %-*s %14.6g %-2s %-12.6g\n", c.pass ? "ok" : "FAIL",
                  static_cast<int>(width), c.name.c_str(), c.value, relation_name(c.relation), c.threshold);
    out << line;
  }
  for (const auto& [k, v] : report.values) {
    out << "  " << k << " =";
    const std::size_t shown = std::min<std::size_t>(v.size(), 12);
    for (std::size_t i = 0; i < shown; ++i) out << " " << format_double(v[i]);
    if (shown < v.size()) out << " ... (" << v.size() << " entries)";
    out << "\n";
  }
  for (const auto& [k, v] : report.notes) out << "  note " << k << ": " << v << "\n";
  if (report.elapsed_seconds) out << "  elapsed " << *report.elapsed_seconds << " s\n";
  out << (report.passed() ? "PASS" : "FAIL") << "\n";
  return out.str();
}

std::string render(const SuiteReport& report, Format format, bool include_timing) {
  switch (format) {
    case Format::json: return to_json(report, include_timing);
    case Format::csv: return to_csv(report);
    case Format::text: return to_text(report);
  }
  return {};
}

void emit_report(const SuiteReport& report, Format format, const std::filesystem::path& path,
                 bool include_timing) {
  const std::string text = render(report, format, include_timing);
  if (path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write report to " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::io, "failed writing report to " + path.string());
}

}  // namespace cycleflow::report
