#include "filterformer/error.hpp"

namespace filterformer {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kInvalidPath: return "invalid-path";
    case ErrorKind::kInvalidMaskTime: return "invalid-mask-time";
    case ErrorKind::kOffGrid: return "off-grid";
    case ErrorKind::kInvalidCovariance: return "invalid-covariance";
    case ErrorKind::kAssumptionViolation: return "assumption-violation";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kRiccatiBlowup: return "riccati-blowup";
    case ErrorKind::kDuplicatePaths: return "duplicate-paths";
    case ErrorKind::kRetryBudgetExhausted: return "retry-budget-exhausted";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace filterformer
