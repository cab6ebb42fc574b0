#include "sip/error.hpp"

namespace sip {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "E_PARSE";
    case ErrorCode::kInvalidArgument: return "E_INVALID_ARGUMENT";
    case ErrorCode::kOutOfRange: return "E_OUT_OF_RANGE";
    case ErrorCode::kDimensionMismatch: return "E_DIMENSION_MISMATCH";
    case ErrorCode::kNotConverged: return "E_NOT_CONVERGED";
    case ErrorCode::kZeroDegree: return "E_ZERO_DEGREE";
    case ErrorCode::kIo: return "E_IO";
    case ErrorCode::kStaleState: return "E_STALE_STATE";
    case ErrorCode::kMissingData: return "E_MISSING_DATA";
  }
  return "E_UNKNOWN";
}

}  // namespace sip
