#include "nest/error.hpp"

namespace nest {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "invalid-config";
    case ErrorCode::UnknownParent: return "unknown-parent";
    case ErrorCode::DepthExceeded: return "depth-exceeded";
    case ErrorCode::ScoreOutOfRange: return "score-out-of-range";
    case ErrorCode::RootNode: return "root-node";
    case ErrorCode::UnknownNode: return "unknown-node";
    case ErrorCode::ValueOutOfRange: return "value-out-of-range";
    case ErrorCode::MissingCount: return "missing-count";
    case ErrorCode::InvariantViolation: return "invariant-violation";
    case ErrorCode::OracleFailure: return "oracle-failure";
    case ErrorCode::BudgetZero: return "budget-zero";
    case ErrorCode::EmptyCandidates: return "empty-candidates";
    case ErrorCode::MissingRewards: return "missing-rewards";
    case ErrorCode::ComponentOutOfRange: return "component-out-of-range";
    case ErrorCode::TransportError: return "transport-error";
    case ErrorCode::ParseError: return "parse-error";
    case ErrorCode::RangeError: return "range-error";
    case ErrorCode::FixtureMiss: return "fixture-miss";
    case ErrorCode::IoError: return "io-error";
    case ErrorCode::EmptyPool: return "empty-pool";
    case ErrorCode::BadInput: return "bad-input";
  }
  return "unknown-error";
}

}  // namespace nest
