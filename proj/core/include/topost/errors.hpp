#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace topost {

enum class ErrorKind {
  change_inapplicable,
  grid_disconnected,
  parse_error,
  unsupported_feature,
  schema_error,
  unknown_id,
  singular_system,
  islanding_outage,
  degenerate_observable,
  singular_matrix,
  self_check_failed,
  duplicate_change,
  invalid_argument,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI in particular) can map it onto a stable exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failures keep the 1-based line number of the offending input.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorKind::parse_error, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace topost
