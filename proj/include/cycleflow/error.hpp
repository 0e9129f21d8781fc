#pragma once

#include <stdexcept>
#include <string>

namespace cycleflow {

/// Error categories. Each maps to a distinct CLI exit code (see exit_code()).
enum class ErrorCode {
  structural,             // malformed map index, size mismatch, singular solve
  unsupported_operation,  // e.g. backward orbit on a non-invertible system
  precondition,           // operation contract violated by the caller
  internal_inconsistency, // infinite return time on positive mass
  invalid_model,          // negative residual kernel, bad minorization
  budget_exceeded,        // simulation ran past its step budget
  parse,                  // unreadable JSON
  unknown_kind,           // model file declares an unknown "kind"
  invariant_violation,    // model parsed but violates a type invariant
  io,                     // file missing or unwritable
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Error raised while loading a model file; carries the JSON pointer of the
/// offending field.
class LoadError : public Error {
public:
  LoadError(ErrorCode code, std::string field, const std::string& what)
      : Error(code, field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

inline int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse: return 3;
    case ErrorCode::unknown_kind: return 4;
    case ErrorCode::invariant_violation: return 5;
    case ErrorCode::io: return 6;
    case ErrorCode::precondition: return 7;
    case ErrorCode::unsupported_operation: return 8;
    case ErrorCode::budget_exceeded: return 9;
    case ErrorCode::internal_inconsistency: return 10;
    case ErrorCode::invalid_model: return 11;
    case ErrorCode::structural: return 12;
  }
  return 70;
}

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::structural: return "structural";
    case ErrorCode::unsupported_operation: return "unsupported-operation";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::internal_inconsistency: return "internal-inconsistency";
    case ErrorCode::invalid_model: return "invalid-model";
    case ErrorCode::budget_exceeded: return "budget-exceeded";
    case ErrorCode::parse: return "parse";
    case ErrorCode::unknown_kind: return "unknown-kind";
    case ErrorCode::invariant_violation: return "invariant-violation";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

}  // namespace cycleflow
