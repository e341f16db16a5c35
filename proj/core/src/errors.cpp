#include "lckf/errors.hpp"

namespace lckf {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kModel: return "model error";
    case ErrorCode::kStatistics: return "statistics error";
    case ErrorCode::kConditioning: return "conditioning error";
    case ErrorCode::kConstraint: return "constraint error";
    case ErrorCode::kDegreesOfFreedom: return "degrees-of-freedom error";
    case ErrorCode::kSchedule: return "schedule error";
    case ErrorCode::kRegime: return "regime error";
    case ErrorCode::kInitialization: return "initialization error";
  }
  return "error";
}

}  // namespace lckf
