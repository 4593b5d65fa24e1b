#pragma once

#include <stdexcept>
#include <string>

namespace fullstab {

enum class ErrorCode {
  syntax,
  unknown_identifier,
  dimension_mismatch,
  evaluation,
  infeasible_point,
  not_a_normal,
  no_multiplier,
  too_large,
  not_applicable,
  dependent_rows,
  no_samples,
  no_localization,
  insufficient_pairs,
  io,
  invalid_argument,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::syntax: return "syntax";
    case ErrorCode::unknown_identifier: return "unknown_identifier";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::evaluation: return "evaluation";
    case ErrorCode::infeasible_point: return "infeasible_point";
    case ErrorCode::not_a_normal: return "not_a_normal";
    case ErrorCode::no_multiplier: return "no_multiplier";
    case ErrorCode::too_large: return "too_large";
    case ErrorCode::not_applicable: return "not_applicable";
    case ErrorCode::dependent_rows: return "dependent_rows";
    case ErrorCode::no_samples: return "no_samples";
    case ErrorCode::no_localization: return "no_localization";
    case ErrorCode::insufficient_pairs: return "insufficient_pairs";
    case ErrorCode::io: return "io";
    case ErrorCode::invalid_argument: return "invalid_argument";
  }
  return "unknown";
}

/// Every failure raised by the toolkit carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failures also remember where they happened (1-based).
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, const std::string& what, int line, int column)
      : Error(code, "line " + std::to_string(line) + ", column " +
                        std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace fullstab
