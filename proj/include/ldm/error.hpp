#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ldm {

enum class ErrorCode {
  FormatViolation,
  DuplicateMember,
  NoValidProposal,
  NoFixtureMatch,
  TransportError,
  RateLimited,
  EmptyResponse,
  EmptyInput,
  UnknownGoalType,
  IoError,
  SchemaVersionMismatch,
  EmptyAction,
  UnparseableGoal,
  StaleHandle,
  ConfigError,
  BackendError,
  CorruptMemory,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FormatViolation: return "FormatViolation";
    case ErrorCode::DuplicateMember: return "DuplicateMember";
    case ErrorCode::NoValidProposal: return "NoValidProposal";
    case ErrorCode::NoFixtureMatch: return "NoFixtureMatch";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::EmptyResponse: return "EmptyResponse";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnknownGoalType: return "UnknownGoalType";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::EmptyAction: return "EmptyAction";
    case ErrorCode::UnparseableGoal: return "UnparseableGoal";
    case ErrorCode::StaleHandle: return "StaleHandle";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::CorruptMemory: return "CorruptMemory";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace ldm
