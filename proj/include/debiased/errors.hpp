#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace debiased {

enum class ErrorKind {
  DimensionMismatch,
  EmptySubset,
  MissingColumn,
  QuadratureGridEmpty,
  TooFewRows,
  InvalidLevel,
  InfeasibleSpec,
  PreconditionViolated,
  InvalidConfig,
  DegenerateOmega,
  InvalidArgs,
  ParseError,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every error thrown by the library carries a kind so callers (the CLI in
// particular) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptySubset: return "EmptySubset";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::QuadratureGridEmpty: return "QuadratureGridEmpty";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::InvalidLevel: return "InvalidLevel";
    case ErrorKind::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::DegenerateOmega: return "DegenerateOmega";
    case ErrorKind::InvalidArgs: return "InvalidArgs";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

}  // namespace debiased
