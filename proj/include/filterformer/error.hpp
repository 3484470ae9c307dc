#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace filterformer {

enum class ErrorKind {
  kInvalidArgument,
  kDimensionMismatch,
  kInvalidPath,
  kInvalidMaskTime,
  kOffGrid,
  kInvalidCovariance,
  kAssumptionViolation,
  kDivergence,
  kRiccatiBlowup,
  kDuplicatePaths,
  kRetryBudgetExhausted,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorKind kind);

/// Every failure in the library surfaces as this exception. `kind()` lets
/// callers (notably the CLI) map failures to exit codes without string
/// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Errors raised while stepping a discretized system carry the step index.
class StepError : public Error {
 public:
  StepError(ErrorKind kind, long step, const std::string& what)
      : Error(kind, "step " + std::to_string(step) + ": " + what), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace filterformer
