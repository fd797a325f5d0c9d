#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace viraal {

enum class ErrorCode {
  InvalidArgument,
  EmptyInput,
  NonConvergent,
  DispersedInput,
  NonPositiveDistance,
  AtOpticalCenter,
  NoHit,
  DegenerateRays,
  LengthMismatch,
  IndexOutOfRange,
  ZeroLink,
  SessionFinalized,
  NoTrials,
  NotFinalized,
  NoPlan,
  NoViews,
  IoFailure,
  SchemaError,
  BindFailure,
  UnknownVerb,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonConvergent: return "NonConvergent";
    case ErrorCode::DispersedInput: return "DispersedInput";
    case ErrorCode::NonPositiveDistance: return "NonPositiveDistance";
    case ErrorCode::AtOpticalCenter: return "AtOpticalCenter";
    case ErrorCode::NoHit: return "NoHit";
    case ErrorCode::DegenerateRays: return "DegenerateRays";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ZeroLink: return "ZeroLink";
    case ErrorCode::SessionFinalized: return "SessionFinalized";
    case ErrorCode::NoTrials: return "NoTrials";
    case ErrorCode::NotFinalized: return "NotFinalized";
    case ErrorCode::NoPlan: return "NoPlan";
    case ErrorCode::NoViews: return "NoViews";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::UnknownVerb: return "UnknownVerb";
  }
  return "Unknown";
}

/// Exception type thrown by every viraal operation. The code is stable and is
/// what the service reports to clients; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace viraal
