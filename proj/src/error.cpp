#include "minbs/error.hpp"

namespace minbs {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::InvalidWeights: return "InvalidWeights";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InvalidMeasurement: return "InvalidMeasurement";
    case ErrorKind::DegenerateMarginal: return "DegenerateMarginal";
    case ErrorKind::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace minbs
