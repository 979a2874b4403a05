#include "selinf/types.hpp"

#include <cmath>

namespace selinf {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptySelection: return "EmptySelection";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::SingularDesign: return "SingularDesign";
    case ErrorKind::Separation: return "Separation";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DomainViolation: return "DomainViolation";
    case ErrorKind::GuardExceeded: return "GuardExceeded";
    case ErrorKind::DegenerateGrid: return "DegenerateGrid";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::MalformedInput: return "MalformedInput";
  }
  return "Unknown";
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::SquaredError: return "lasso";
    case LossKind::Logistic: return "logistic";
    case LossKind::ForwardStepwise: return "fs";
  }
  return "unknown";
}

std::string_view to_string(RandomizationKind kind) {
  switch (kind) {
    case RandomizationKind::Gaussian: return "gaussian";
    case RandomizationKind::Laplace: return "laplace";
  }
  return "unknown";
}

void RandomizationSpec::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw Error(ErrorKind::InvalidArgument, "randomization scale must be positive");
  if (dimension < 1)
    throw Error(ErrorKind::InvalidArgument, "randomization dimension must be >= 1");
}

}  // namespace selinf
