#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace minbs {

enum class ErrorKind {
  NotHermitian,
  NotPSD,
  NumericalFailure,
  DimensionMismatch,
  NotNormalized,
  InvalidWeights,
  OutOfRange,
  InvalidMeasurement,
  DegenerateMarginal,
  InvalidInput,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-readable kind. Every failure raised by the
/// library goes through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace minbs
