#include "sigmatrack/error.hpp"

namespace sigmatrack {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFrameMismatch: return "frame mismatch";
    case ErrorCode::kInvalidDepth: return "invalid depth";
    case ErrorCode::kDegenerateGeometry: return "degenerate geometry";
    case ErrorCode::kNumerical: return "numerical error";
    case ErrorCode::kInvalidRotation: return "invalid rotation";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kIo: return "io error";
  }
  return "unknown error";
}

}  // namespace sigmatrack
