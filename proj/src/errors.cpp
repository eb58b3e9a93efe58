#include "fredgame/errors.hpp"

namespace fredgame {

const char* error_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidGrid: return "InvalidGrid";
    case ErrorKind::InadmissibleKernel: return "InadmissibleKernel";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::SingularOperator: return "SingularOperator";
    case ErrorKind::UnsupportedSignal: return "UnsupportedSignal";
    case ErrorKind::ConsistencyViolation: return "ConsistencyViolation";
    case ErrorKind::ConvexityViolation: return "ConvexityViolation";
    case ErrorKind::SizeExceeded: return "SizeExceeded";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NonConcave: return "NonConcave";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConsistencyViolation:
      return 1;
    case ErrorKind::SingularOperator:
    case ErrorKind::SingularSystem:
    case ErrorKind::NonConcave:
    case ErrorKind::SizeExceeded:
      return 3;
    default:
      return 2;
  }
}

}  // namespace fredgame
