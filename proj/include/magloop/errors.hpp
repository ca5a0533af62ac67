#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace magloop {

enum class ErrorKind {
  DegenerateMetric,
  StepFailure,
  NoReturn,
  NotCritical,
  SymplecticityLoss,
  SubcriticalEnergy,
  NoConvergence,
  PeriodCollapse,
  SingularHessian,
  Diverged,
  NoOrbitFound,
  BudgetExceeded,
  InvalidArgument,
  AsymmetricSystem,
  Config,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the toolkit; `kind()` carries the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace magloop
