#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "minbs/qmatrix.hpp"

namespace minbs {

/// One eigenspace of a reference state: orthonormal columns spanning it.
struct InvariantBlock {
  double eigenvalue = 0.0;
  CMatrix basis;  // dim x k
};

/// Rank-1 projective measurement aligned with the eigenspaces of a reference
/// state. Column g of basis() spans projector g.
struct InvariantMeasurement {
  int referenceDim = 0;
  std::vector<InvariantBlock> blocks;
  std::vector<CMatrix> blockUnitaries;  // k x k per block

  [[nodiscard]] CMatrix basis() const;
  [[nodiscard]] std::vector<CMatrix> projectors() const;
};

enum class Method { PureClosedForm, NondegenerateClosedForm, QubitClosedForm, Optimizer, BoundOnly };

std::string_view to_string(Method method);

struct Bounds {
  std::optional<double> t2Upper;
  std::optional<double> t3Upper;
};

struct MeasureResult {
  double value = 0.0;
  Method method = Method::Optimizer;
  std::optional<InvariantMeasurement> optimalMeasurement;
  Bounds bounds;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> warnings;
};

/// Clamps into [0, 1]; a correction larger than `warnAbove` is recorded.
double clamp_unit(double value, MeasureResult& result, double warnAbove);

}  // namespace minbs
