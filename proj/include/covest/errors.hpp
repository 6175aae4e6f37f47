#pragma once

#include <stdexcept>
#include <string>

namespace covest {

enum class ErrorCode {
  InvalidInput,
  NotPositiveDefinite,
  NotConverged,
  StepRejected,
  DomainError,
  TooLarge,
  NoAdversary,
  EmptyLevelSet,
  SetupFailed,
  IoError,
};

const char* to_string(ErrorCode code);

/// Base exception for every failure raised by the library; `code()` lets
/// callers branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace covest
