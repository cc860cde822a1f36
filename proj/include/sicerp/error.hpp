#pragma once

#include <stdexcept>
#include <string>

namespace sicerp {

enum class ErrorKind {
  InvalidMatrix,
  NotPositiveDefinite,
  DimensionError,
  SingularityError,
  NotConverged,
  FormatError,
  TooShort,
  DegenerateInput,
  IndefiniteKernel,
  DegenerateLabels,
  StaleDuals,
  InsufficientClass,
  ModelMismatch,
  SpecError,
  ConfigError,
  NotFound,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // what() without the kind prefix, for wrapping in more context.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

// CLI exit code for an error: 2 config, 3 data, 4 convergence.
int exit_code_for(ErrorKind kind);

}  // namespace sicerp
