#include "paramnet/errors.hpp"

namespace paramnet {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidLength: return "InvalidLength";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::InvalidState: return "InvalidState";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UsageError: return "UsageError";
  }
  return "Unknown";
}

}  // namespace paramnet
