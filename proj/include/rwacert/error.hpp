#pragma once

#include <stdexcept>
#include <string>

namespace rwacert {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  DegenerateDesign,
  SolverStall,
  NonFiniteLoss,
  InsufficientData,
  Io,
  Parse,
};

const char* to_string(ErrorKind kind) noexcept;

// All domain failures raised by the library carry a machine-readable kind;
// the CLI maps them to exit code 1 with an `error[<kind>]:` prefix.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace rwacert
