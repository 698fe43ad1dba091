#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gwrdt {

enum class ErrorCode {
  InvalidSymbol,
  InvalidParameter,
  StochasticityViolation,
  CriticalityViolation,
  CapViolation,
  InvalidTree,
  NoSuchSize,
  ConditioningFailed,
  CountExceeded,
  SizeMismatch,
  AlphabetMismatch,
  NoConvergence,
  DegenerateMatrix,
  NotCritical,
  OptFailed,
  PreconditionViolated,
  ParseError,
  IoError,
};

std::string_view error_name(ErrorCode code) noexcept;

// Every failure raised by the core library carries one of the codes above;
// the C API maps them one-to-one onto gwrdt_status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace gwrdt
