#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wardforge {

enum class ErrorCode {
  AllZeroColumns,
  NonFiniteEntry,
  SingularMatrix,
  InvalidLattice,
  AtPole,
  SyntaxError,
  UnknownFunction,
  UnboundParam,
  MissingLattice,
  PersistentPole,
  InvalidPole,
  EvalAtPole,
  PoleCollision,
  PeriodMismatch,
  IrrationalRatio,
  NotPeriodic,
  ModeOutsideBall,
  HalfPlaneViolation,
  DuplicateMode,
  InvalidArgument,
  WindowTooNarrow,
  EvalFailure,
  SchemaError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AllZeroColumns: return "AllZeroColumns";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::InvalidLattice: return "InvalidLattice";
    case ErrorCode::AtPole: return "AtPole";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownFunction: return "UnknownFunction";
    case ErrorCode::UnboundParam: return "UnboundParam";
    case ErrorCode::MissingLattice: return "MissingLattice";
    case ErrorCode::PersistentPole: return "PersistentPole";
    case ErrorCode::InvalidPole: return "InvalidPole";
    case ErrorCode::EvalAtPole: return "EvalAtPole";
    case ErrorCode::PoleCollision: return "PoleCollision";
    case ErrorCode::PeriodMismatch: return "PeriodMismatch";
    case ErrorCode::IrrationalRatio: return "IrrationalRatio";
    case ErrorCode::NotPeriodic: return "NotPeriodic";
    case ErrorCode::ModeOutsideBall: return "ModeOutsideBall";
    case ErrorCode::HalfPlaneViolation: return "HalfPlaneViolation";
    case ErrorCode::DuplicateMode: return "DuplicateMode";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::WindowTooNarrow: return "WindowTooNarrow";
    case ErrorCode::EvalFailure: return "EvalFailure";
    case ErrorCode::SchemaError: return "SchemaError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wardforge
