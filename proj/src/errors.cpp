#include "hypokin/errors.hpp"

namespace hypokin {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Structural: return "StructuralError";
    case ErrorKind::NotCanonicalForm: return "NotCanonicalForm";
    case ErrorKind::HormanderViolation: return "HormanderViolation";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::EmptyInterval: return "EmptyInterval";
    case ErrorKind::InvalidScale: return "InvalidScale";
    case ErrorKind::NumericalDivergence: return "NumericalDivergence";
    case ErrorKind::DatumEvaluationError: return "DatumEvaluationError";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::MissingDerivative: return "MissingDerivative";
    case ErrorKind::InvalidData: return "InvalidData";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::IoError: return "IoError";
  }
  return "Error";
}

}  // namespace hypokin
