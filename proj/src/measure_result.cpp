#include "minbs/measure_result.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace minbs {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::PureClosedForm: return "pure_closed_form";
    case Method::NondegenerateClosedForm: return "nondegenerate_closed_form";
    case Method::QubitClosedForm: return "qubit_c_closed_form";
    case Method::Optimizer: return "optimizer";
    case Method::BoundOnly: return "bound_only";
  }
  return "unknown";
}

double clamp_unit(double value, MeasureResult& result, double warnAbove) {
  const double clamped = std::clamp(value, 0.0, 1.0);
  const double shift = std::abs(clamped - value);
  if (shift > warnAbove) {
    std::ostringstream os;
    os << "value " << value << " clamped into [0, 1]";
    result.warnings.push_back(os.str());
  }
  if (shift > 0.0) result.diagnostics["clamp_shift"] = shift;
  return clamped;
}

}  // namespace minbs
