#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "cycleflow/finite_system.hpp"
#include "cycleflow/harris.hpp"
#include "cycleflow/markov.hpp"
#include "cycleflow/report.hpp"

namespace cycleflow::io {

using AnyModel = std::variant<FiniteSystem<double>, FiniteSystem<Rational>, markov::StochasticMatrix,
                              harris::HarrisModel>;

/// A validated model plus the identity recorded in reports.
struct LoadedModel {
  report::ModelInfo info;
  AnyModel model;
  std::optional<harris::MinorizationFit> fitted;  // harris files without epsilon/lambda
};

/// Reads and validates a model file. Failures raise LoadError with the JSON
/// pointer of the offending field: ErrorCode::io (unreadable file), parse,
/// unknown_kind, or invariant_violation.
LoadedModel load_model(const std::filesystem::path& path);

/// Same, from text already in memory.
LoadedModel parse_model(std::string_view text, std::string name = "model");

/// FNV-1a 64-bit hash, 16 lowercase hex digits.
std::string content_hash(std::string_view bytes);

}  // namespace cycleflow::io
