#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sip {

enum class ErrorCode {
  kParse,
  kInvalidArgument,
  kOutOfRange,
  kDimensionMismatch,
  kNotConverged,
  kZeroDegree,
  kIo,
  kStaleState,
  kMissingData,
};

/// Machine-parsable identifier, e.g. "E_PARSE".
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sip
