#pragma once

// Command-line front end. run() is the whole program; main() only forwards
// argv so the test suite can drive every subcommand in-process.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "minbs/error.hpp"
#include "minbs/states.hpp"

namespace minbs::cli {

inline constexpr const char* kToolName = "minbs";
inline constexpr const char* kToolVersion = "0.1.0";

/// Normalized state description: either {"family", "params"} or
/// {"dims", "matrix"} with row-major [re, im] entries.
struct StateSpec {
  nlohmann::json source;
};

/// `text` is an inline spec ("family=werner,v=0.5") or a path to a JSON file.
StateSpec parse_state_spec(const std::string& text);

/// Raw matrix of a {"dims", "matrix"} spec, without validation.
CMatrix matrix_from_json(const nlohmann::json& rows);
nlohmann::json matrix_to_json(const CMatrix& m);

/// Builds the state. Random families without an explicit seed draw from
/// (seed, slot) so that --a and --b differ.
DensityMatrix resolve_state(const StateSpec& spec, std::uint64_t seed, int slot = 0);

/// Validation report for a spec; family specs are built and then checked.
ValidationReport validate_spec(const StateSpec& spec, std::uint64_t seed);

/// Raised when a state fails validation; carries the report for the user.
class InvalidStateError : public Error {
 public:
  InvalidStateError(ErrorKind kind, const std::string& what, ValidationReport report)
      : Error(kind, what), report_(std::move(report)) {}
  [[nodiscard]] const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

struct RunReport {
  std::string tool = kToolName;
  std::string version = kToolVersion;
  std::string command;
  std::string measure;
  std::string scenario;
  std::uint64_t seed = 0;
  nlohmann::json optimizer;
  nlohmann::json inputs;
  double value = 0.0;
  std::string method;
  std::optional<double> t2Upper;
  std::optional<double> t3Upper;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> warnings;
  nlohmann::json measurement;  // basis columns as [re, im] rows, or null
  nlohmann::json timing;       // {"timestamp", "wall_ms"}, or null in comparison mode

  bool operator==(const RunReport&) const = default;
};

nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

enum ExitCode : int { kOk = 0, kAuditFailure = 1, kInvalidInput = 2, kNumericalFailure = 3 };

int exit_code_for(ErrorKind kind);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace minbs::cli
