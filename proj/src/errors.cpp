#include "magloop/errors.hpp"

namespace magloop {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateMetric: return "DegenerateMetric";
    case ErrorKind::StepFailure: return "StepFailure";
    case ErrorKind::NoReturn: return "NoReturn";
    case ErrorKind::NotCritical: return "NotCritical";
    case ErrorKind::SymplecticityLoss: return "SymplecticityLoss";
    case ErrorKind::SubcriticalEnergy: return "SubcriticalEnergy";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::PeriodCollapse: return "PeriodCollapse";
    case ErrorKind::SingularHessian: return "SingularHessian";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::NoOrbitFound: return "NoOrbitFound";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::AsymmetricSystem: return "AsymmetricSystem";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace magloop
