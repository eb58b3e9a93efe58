#pragma once

#include <stdexcept>
#include <string>

namespace fredgame {

enum class ErrorKind {
  InvalidGrid,
  InadmissibleKernel,
  ShapeError,
  SingularOperator,
  UnsupportedSignal,
  ConsistencyViolation,
  ConvexityViolation,
  SizeExceeded,
  SingularSystem,
  NonConcave,
  ConfigError,
};

const char* error_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_name(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Exit code contract of the command line tool: 1 invariant, 2 config, 3 numerical.
int exit_code_for(ErrorKind kind);

}  // namespace fredgame
