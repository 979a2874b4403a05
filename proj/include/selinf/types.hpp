#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace selinf {

using Index = Eigen::Index;

enum class ErrorKind {
  InvalidArgument,
  EmptySelection,
  NonConvergence,
  SingularDesign,
  Separation,
  DimensionMismatch,
  DomainViolation,
  GuardExceeded,
  DegenerateGrid,
  EmptyBatch,
  MalformedInput,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. `kind()` lets callers branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

enum class LossKind { SquaredError, Logistic, ForwardStepwise };
enum class RandomizationKind { Gaussian, Laplace };

std::string_view to_string(LossKind kind);
std::string_view to_string(RandomizationKind kind);

/// Isotropic randomization. `scale` is the standard deviation for the
/// Gaussian kind and the scale parameter b for the Laplace kind.
struct RandomizationSpec {
  RandomizationKind kind = RandomizationKind::Gaussian;
  double scale = 1.0;
  Index dimension = 0;

  void validate() const;
};

struct PenaltySpec {
  double lambda = 0.0;
  double epsilon = 0.0;
};

}  // namespace selinf
