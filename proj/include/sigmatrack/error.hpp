#pragma once

#include <stdexcept>
#include <string>

namespace sigmatrack {

enum class ErrorCode {
  kFrameMismatch,
  kInvalidDepth,
  kDegenerateGeometry,
  kNumerical,
  kInvalidRotation,
  kInvalidArgument,
  kConfig,
  kIo,
};

const char* to_string(ErrorCode code);

/// Library-wide exception. The code lets callers branch without parsing
/// the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sigmatrack
