#pragma once

#include <stdexcept>
#include <string>

namespace nest {

// Stable error codes used across the library. CLI exit-code mapping and unit
// tests key off these rather than message text.
enum class ErrorCode {
  InvalidConfig,
  UnknownParent,
  DepthExceeded,
  ScoreOutOfRange,
  RootNode,
  UnknownNode,
  ValueOutOfRange,
  MissingCount,
  InvariantViolation,
  OracleFailure,
  BudgetZero,
  EmptyCandidates,
  MissingRewards,
  ComponentOutOfRange,
  TransportError,
  ParseError,
  RangeError,
  FixtureMiss,
  IoError,
  EmptyPool,
  BadInput,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace nest
