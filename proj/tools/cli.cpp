#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "minbs/measures.hpp"

namespace minbs::cli {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Parsing helpers

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, sep)) out.push_back(item);
  return out;
}

std::optional<double> parse_number(const std::string& text) {
  // Accepts plain decimals and simple fractions such as -1/3.
  const auto slash = text.find('/');
  try {
    std::size_t used = 0;
    if (slash == std::string::npos) {
      const double v = std::stod(text, &used);
      if (used == text.size()) return v;
      return std::nullopt;
    }
    const std::string num = text.substr(0, slash), den = text.substr(slash + 1);
    std::size_t u1 = 0, u2 = 0;
    const double a = std::stod(num, &u1);
    const double b = std::stod(den, &u2);
    if (u1 == num.size() && u2 == den.size() && b != 0.0) return a / b;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

double require_number(const std::string& text, const std::string& what) {
  const auto v = parse_number(text);
  if (!v) throw Error(ErrorKind::InvalidInput, what + ": not a number: " + text);
  return *v;
}

json parse_inline_value(const std::string& key, const std::string& value) {
  if (key == "dims") {
    json dims = json::array();
    for (const auto& d : split(value, 'x')) dims.push_back(static_cast<int>(require_number(d, "dims")));
    return dims;
  }
  if (value.find(';') != std::string::npos) {
    json list = json::array();
    for (const auto& part : split(value, ';')) list.push_back(require_number(part, key));
    return list;
  }
  if (const auto v = parse_number(value)) return *v;
  return value;
}

StateSpec parse_inline(const std::string& text) {
  json params = json::object();
  std::string family;
  for (const auto& part : split(text, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidInput, "expected key=value in state spec: " + part);
    const std::string key = part.substr(0, eq), value = part.substr(eq + 1);
    if (key == "family") {
      const auto colon = value.find(':');
      family = value.substr(0, colon);
      if (colon != std::string::npos) params["kind"] = value.substr(colon + 1);
    } else {
      params[key] = parse_inline_value(key, value);
    }
  }
  if (family.empty()) throw Error(ErrorKind::InvalidInput, "state spec needs family=<name>");
  return {json{{"family", family}, {"params", params}}};
}

double param_number(const json& params, const std::string& key, double fallback) {
  if (!params.contains(key)) return fallback;
  const json& v = params.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return require_number(v.get<std::string>(), key);
  throw Error(ErrorKind::InvalidInput, "parameter " + key + " must be a number");
}

std::vector<double> param_list(const json& params, const std::string& key) {
  const json& v = params.at(key);
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw Error(ErrorKind::InvalidInput, "parameter " + key + " must be a list");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw Error(ErrorKind::InvalidInput, "parameter " + key + " must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<int> dims_of(const json& v) {
  if (!v.is_array() || v.empty()) throw Error(ErrorKind::InvalidInput, "dims must be a nonempty list");
  std::vector<int> dims;
  for (const auto& d : v) {
    if (!d.is_number()) throw Error(ErrorKind::InvalidInput, "dims must hold integers");
    const double x = d.get<double>();
    if (x < 1 || x != std::floor(x) || x > 64) throw Error(ErrorKind::InvalidInput, "dims must be positive integers");
    dims.push_back(static_cast<int>(x));
  }
  return dims;
}

std::uint64_t seed_for(const json& params, std::uint64_t seed, int slot) {
  if (params.contains("seed")) return static_cast<std::uint64_t>(param_number(params, "seed", 0.0));
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(slot)};
  std::uint32_t word[2];
  seq.generate(word, word + 2);
  return (static_cast<std::uint64_t>(word[0]) << 32) | word[1];
}

states::BellKind bell_kind(const std::string& name) {
  if (name == "phi+") return states::BellKind::PhiPlus;
  if (name == "phi-") return states::BellKind::PhiMinus;
  if (name == "psi+") return states::BellKind::PsiPlus;
  if (name == "psi-") return states::BellKind::PsiMinus;
  throw Error(ErrorKind::InvalidInput, "unknown Bell state: " + name + " (use phi+, phi-, psi+, psi-)");
}

std::array<double, 4> bell_diagonal_weights(const json& params) {
  if (params.contains("weights")) {
    const auto w = param_list(params, "weights");
    if (w.size() != 4) throw Error(ErrorKind::InvalidWeights, "bell_diagonal needs four weights");
    return {w[0], w[1], w[2], w[3]};
  }
  std::array<double, 4> w{};
  int rest = -1;
  double known = 0.0;
  for (int k = 0; k < 4; ++k) {
    const std::string key = "l" + std::to_string(k + 1);
    if (params.contains(key) && params.at(key).is_string() && params.at(key).get<std::string>() == "rest") {
      if (rest >= 0) throw Error(ErrorKind::InvalidWeights, "only one weight may be 'rest'");
      rest = k;
      continue;
    }
    w[k] = param_number(params, key, 0.0);
    known += w[k];
  }
  if (rest >= 0) w[rest] = 1.0 - known;
  return w;
}

// Weights of the Bell-diagonal family a spec belongs to, if any.
std::optional<std::array<double, 4>> spec_bell_weights(const StateSpec& spec) {
  if (!spec.source.contains("family")) return std::nullopt;
  const std::string family = spec.source.at("family").get<std::string>();
  const json params = spec.source.value("params", json::object());
  if (family == "bell_diagonal") return bell_diagonal_weights(params);
  if (family == "werner") return states::werner_weights(param_number(params, "v", 0.0));
  if (family == "classical_separable") return std::array<double, 4>{0.5, 0.5, 0.0, 0.0};
  if (family == "bell") {
    std::array<double, 4> w{};
    w[static_cast<int>(bell_kind(params.value("kind", std::string("phi+"))))] = 1.0;
    return w;
  }
  return std::nullopt;
}

DensityMatrix resolve_family(const std::string& family, const json& params, std::uint64_t seed, int slot) {
  if (family == "bell") return states::bell(bell_kind(params.value("kind", std::string("phi+"))));
  if (family == "bell_diagonal") return states::bell_diagonal(bell_diagonal_weights(params));
  if (family == "werner") {
    if (!params.contains("v")) throw Error(ErrorKind::InvalidInput, "werner needs v");
    return states::werner(param_number(params, "v", 0.0));
  }
  if (family == "classical_separable") return states::classical_separable();
  if (family == "pure_schmidt") {
    std::vector<double> c;
    if (params.contains("coefficients")) {
      c = param_list(params, "coefficients");
    } else if (params.contains("l")) {
      const double l = param_number(params, "l", 0.0);
      if (l < 0.0 || l > 1.0) throw Error(ErrorKind::OutOfRange, "pure_schmidt l must lie in [0, 1]");
      c = {l, std::sqrt(std::max(0.0, 1.0 - l * l))};
    } else {
      throw Error(ErrorKind::InvalidInput, "pure_schmidt needs coefficients or l");
    }
    return states::pure_from_schmidt(c);
  }
  if (family == "quantum_classical") {
    const int dim = static_cast<int>(param_number(params, "dim", 2));
    const double p = param_number(params, "p", 0.5);
    if (dim < 1 || p < 0.0 || p > 1.0) throw Error(ErrorKind::OutOfRange, "quantum_classical needs dim >= 1, p in [0, 1]");
    std::mt19937_64 gen(seed_for(params, seed, slot));
    std::vector<states::ClassicalComponent> parts{{states::random_density({dim}, dim, gen), p, 0},
                                                  {states::random_density({dim}, dim, gen), 1.0 - p, 1}};
    const std::string side = params.value("classical", std::string("second"));
    if (side == "second") return states::quantum_classical(parts, 2);
    if (side == "first") return states::classical_quantum(parts, 2);
    throw Error(ErrorKind::InvalidInput, "classical must be 'first' or 'second'");
  }
  if (family == "random") {
    const std::vector<int> dims = params.contains("dims") ? dims_of(params.at("dims")) : std::vector<int>{2, 2};
    const int total = qmatrix::dimension_product(dims);
    const int rank = params.contains("rank") ? static_cast<int>(param_number(params, "rank", total)) : total;
    return states::random_density(dims, rank, seed_for(params, seed, slot));
  }
  throw Error(ErrorKind::InvalidInput, "unknown family: " + family);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open state file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidInput, "malformed JSON in " + path + ": " + e.what());
  }
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt(double x, int digits = 12) {
  std::ostringstream os;
  os << std::setprecision(digits) << x;
  return os.str();
}

// ---------------------------------------------------------------------------
// Shared options

struct CommonOptions {
  std::uint64_t seed = 0;
  int restarts = 32;
  int maxIterations = 2000;
  int threads = 1;
  bool json = false;
  bool csv = false;
  bool noTiming = false;
  bool boundOnly = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--seed", o.seed, "Seed for random families and optimizer restarts")->capture_default_str();
  cmd->add_option("--restarts", o.restarts, "Optimizer restarts")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--max-iterations", o.maxIterations, "Givens sweeps per restart")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--threads", o.threads, "Threads for restarts (0 = all cores)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_flag("--json", o.json, "Machine-readable JSON output");
  cmd->add_flag("--csv", o.csv, "Machine-readable CSV output");
  cmd->add_flag("--no-timing", o.noTiming, "Omit timestamps and wall-clock fields (comparison mode)");
  cmd->add_flag("--bound-only", o.boundOnly, "Never run the optimizer; report bounds where no closed form applies");
}

MeasureOptions measure_options(const CommonOptions& o) {
  MeasureOptions m;
  m.optimizer.restarts = o.restarts;
  m.optimizer.maxIterations = o.maxIterations;
  m.optimizer.threads = o.threads;
  m.optimizer.seed = o.seed;
  m.allowOptimizer = !o.boundOnly;
  return m;
}

json optimizer_json(const MeasureOptions& m) {
  return {{"restarts", m.optimizer.restarts},
          {"max_iterations", m.optimizer.maxIterations},
          {"step_tolerance", m.optimizer.stepTolerance},
          {"value_tolerance", m.optimizer.valueTolerance},
          {"grid_points", m.optimizer.gridPoints},
          {"allow_optimizer", m.allowOptimizer}};
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// Measures

struct Evaluation {
  double value = 0.0;
  std::string method;
  std::optional<double> t2;
  std::optional<double> t3;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> warnings;
  json measurement;
};

Evaluation from_result(const MeasureResult& r) {
  Evaluation e;
  e.value = r.value;
  e.method = std::string(to_string(r.method));
  e.t2 = r.bounds.t2Upper;
  e.t3 = r.bounds.t3Upper;
  for (const auto& [k, v] : r.diagnostics) {
    if (std::isfinite(v)) e.diagnostics[k] = v;
  }
  e.warnings = r.warnings;
  if (r.optimalMeasurement) e.measurement = matrix_to_json(r.optimalMeasurement->basis());
  return e;
}

struct ComputeRequest {
  std::string measure;
  std::string scenario;
  std::optional<StateSpec> a;
  std::optional<StateSpec> b;
  std::optional<CMatrix> observable;
};

Evaluation evaluate(const ComputeRequest& req, const CommonOptions& common) {
  const MeasureOptions options = measure_options(common);
  if (!req.a) throw Error(ErrorKind::InvalidInput, "--a is required");
  const DensityMatrix a = resolve_state(*req.a, common.seed, 0);

  if (req.measure == "skew") {
    if (!req.observable) throw Error(ErrorKind::InvalidInput, "--measure skew requires --observable");
    Evaluation e;
    e.value = measures::skew_information(a, *req.observable, options.tol);
    e.method = "direct";
    return e;
  }
  if (req.measure == "min_s") {
    if (a.dims().size() != 2) throw Error(ErrorKind::InvalidInput, "min_s needs a bipartite state");
    return from_result(measures::min_s(a, options));
  }
  if (a.dims().size() != 2) throw Error(ErrorKind::InvalidInput, "--a must be a bipartite state");

  auto bilocal = [&]() {
    if (req.scenario == "swapped-copy") return BilocalInput(a.swapped(), a);
    if (!req.b) throw Error(ErrorKind::InvalidInput, "scenario 'pair' requires --b");
    const DensityMatrix b = resolve_state(*req.b, common.seed, 1);
    if (b.dims().size() != 2) throw Error(ErrorKind::InvalidInput, "--b must be a bipartite state");
    return BilocalInput(a, b);
  };

  if (req.measure == "minbs") return from_result(measures::minbs(bilocal(), options));
  if (req.measure == "bell_diagonal_closed") {
    const auto weights = spec_bell_weights(*req.a);
    if (!weights) {
      throw Error(ErrorKind::InvalidInput, "bell_diagonal_closed needs a bell, bell_diagonal, werner or classical_separable --a");
    }
    Evaluation e;
    e.value = measures::bell_diagonal_minbs(*weights, options.tol);
    e.method = "bell_diagonal_closed_form";
    e.t2 = measures::upper_bound_t2(BilocalInput(a.swapped(), a), options.tol);
    return e;
  }
  throw Error(ErrorKind::InvalidInput, "unknown measure: " + req.measure);
}

json spec_json(const std::optional<StateSpec>& s) { return s ? s->source : json(nullptr); }

// ---------------------------------------------------------------------------
// Output

void print_report_text(const RunReport& r, std::ostream& out) {
  auto row = [&](const std::string& k, const std::string& v) { out << std::left << std::setw(28) << k << v << '\n'; };
  row("measure", r.measure);
  if (!r.scenario.empty()) row("scenario", r.scenario);
  row("value", fmt(r.value));
  row("method", r.method);
  if (r.t2Upper) row("t2_upper", fmt(*r.t2Upper));
  if (r.t3Upper) row("t3_upper", fmt(*r.t3Upper));
  row("seed", std::to_string(r.seed));
  for (const auto& [k, v] : r.diagnostics) row("  " + k, fmt(v));
  for (const auto& w : r.warnings) row("warning", w);
  if (r.timing.is_object()) row("wall_ms", fmt(r.timing.at("wall_ms").get<double>(), 6));
}

std::string csv_optional(const std::optional<double>& v) {
  return v ? fmt(*v, std::numeric_limits<double>::max_digits10) : "";
}

void print_validation(const ValidationReport& r, std::ostream& os) {
  os << "validation report:\n";
  os << "  finite                " << (r.finite ? "yes" : "no") << '\n';
  os << "  dims match            " << (r.dimsMatch ? "yes" : "no") << '\n';
  os << "  hermitian             " << (r.hermitian ? "yes" : "no") << " (deviation " << fmt(r.hermiticityDeviation, 6)
     << ")\n";
  os << "  positive semidefinite " << (r.positive ? "yes" : "no") << " (min eigenvalue " << fmt(r.minEigenvalue, 6)
     << ")\n";
  os << "  unit trace            " << (r.unitTrace ? "yes" : "no") << " (deviation " << fmt(r.traceDeviation, 6)
     << ")\n";
}

json validation_json(const ValidationReport& r) {
  return {{"ok", r.ok()},
          {"finite", r.finite},
          {"dims_match", r.dimsMatch},
          {"hermitian", r.hermitian},
          {"positive", r.positive},
          {"unit_trace", r.unitTrace},
          {"hermiticity_deviation", finite_or_null(r.hermiticityDeviation)},
          {"min_eigenvalue", finite_or_null(r.minEigenvalue)},
          {"trace_deviation", finite_or_null(r.traceDeviation)},
          {"failures", r.failures()}};
}

// ---------------------------------------------------------------------------
// Subcommands

struct ComputeArgs {
  CommonOptions common;
  std::string measure = "minbs";
  std::string scenario = "pair";
  std::string a, b, observable;
};

CMatrix parse_observable(const std::string& text) {
  if (text.rfind("pauli:", 0) == 0) {
    // Tensor product of Pauli letters, e.g. pauli:ZI.
    CMatrix k = CMatrix::Identity(1, 1);
    for (char c : text.substr(6)) {
      CMatrix p(2, 2);
      switch (c) {
        case 'I': p << 1, 0, 0, 1; break;
        case 'X': p << 0, 1, 1, 0; break;
        case 'Y': p << 0, Complex(0, -1), Complex(0, 1), 0; break;
        case 'Z': p << 1, 0, 0, -1; break;
        default: throw Error(ErrorKind::InvalidInput, std::string("unknown Pauli letter: ") + c);
      }
      k = qmatrix::kron(k, p);
    }
    return k;
  }
  json j;
  if (!text.empty() && (text.front() == '[' || text.front() == '{')) {
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::InvalidInput, std::string("malformed observable JSON: ") + e.what());
    }
  } else {
    j = read_json_file(text);
  }
  const CMatrix k = matrix_from_json(j.is_object() ? j.at("matrix") : j);
  if (qmatrix::hermiticity_deviation(k) > kDefaultTolerances.hermiticity) {
    throw Error(ErrorKind::NotHermitian, "observable is not Hermitian");
  }
  return k;
}

ComputeRequest request_of(const ComputeArgs& args) {
  ComputeRequest req;
  req.measure = args.measure;
  req.scenario = args.scenario;
  if (!args.a.empty()) req.a = parse_state_spec(args.a);
  if (!args.b.empty()) req.b = parse_state_spec(args.b);
  if (!args.observable.empty()) req.observable = parse_observable(args.observable);
  return req;
}

int cmd_compute(const ComputeArgs& args, std::ostream& out) {
  const auto start = Clock::now();
  const ComputeRequest req = request_of(args);
  const Evaluation e = evaluate(req, args.common);

  RunReport r;
  r.command = "compute";
  r.measure = args.measure;
  r.scenario = (args.measure == "minbs") ? args.scenario : (args.measure == "bell_diagonal_closed" ? "swapped-copy" : "");
  r.seed = args.common.seed;
  r.optimizer = optimizer_json(measure_options(args.common));
  r.inputs = {{"a", spec_json(req.a)}, {"b", spec_json(req.b)}};
  if (req.observable) r.inputs["observable"] = matrix_to_json(*req.observable);
  r.value = e.value;
  r.method = e.method;
  r.t2Upper = e.t2;
  r.t3Upper = e.t3;
  r.diagnostics = e.diagnostics;
  r.warnings = e.warnings;
  r.measurement = e.measurement;
  if (!args.common.noTiming) r.timing = {{"timestamp", timestamp_utc()}, {"wall_ms", elapsed_ms(start)}};

  if (args.common.json) {
    out << to_json(r).dump(2) << '\n';
  } else if (args.common.csv) {
    out << "measure,value,method,t2_bound,wall_ms\n";
    out << r.measure << ',' << fmt(r.value, std::numeric_limits<double>::max_digits10) << ',' << r.method << ','
        << csv_optional(r.t2Upper) << ',' << (r.timing.is_object() ? fmt(r.timing.at("wall_ms").get<double>(), 6) : "")
        << '\n';
  } else {
    print_report_text(r, out);
  }
  return kOk;
}

struct SweepArgs {
  ComputeArgs compute;
  std::string param;
  std::string start, stop;
  int steps = 11;
};

int cmd_sweep(const SweepArgs& args, std::ostream& out) {
  const auto begin = Clock::now();
  ComputeRequest base = request_of(args.compute);
  if (!base.a || !base.a->source.contains("family")) {
    throw Error(ErrorKind::InvalidInput, "sweep needs a family spec in --a");
  }
  const double lo = require_number(args.start, "--start");
  const double hi = require_number(args.stop, "--stop");
  if (args.steps < 1) throw Error(ErrorKind::InvalidInput, "--steps must be at least 1");
  // The pair scenario without --b measures the swept state against itself.
  const bool selfPair = args.compute.measure == "minbs" && args.compute.scenario == "pair" && !base.b;

  json rows = json::array();
  for (int i = 0; i < args.steps; ++i) {
    const double x = args.steps == 1 ? lo : lo + (hi - lo) * i / (args.steps - 1);
    ComputeRequest req = base;
    req.a->source["params"][args.param] = x;
    if (selfPair) req.b = req.a;
    const auto t0 = Clock::now();
    const Evaluation e = evaluate(req, args.compute.common);
    json row = {{"param", x}, {"value", e.value}, {"method", e.method}, {"t2_bound", e.t2 ? json(*e.t2) : json(nullptr)}};
    if (!args.compute.common.noTiming) row["wall_ms"] = elapsed_ms(t0);
    rows.push_back(row);
  }

  const auto& common = args.compute.common;
  if (common.json) {
    json report = {{"tool", kToolName},
                   {"version", kToolVersion},
                   {"command", "sweep"},
                   {"measure", args.compute.measure},
                   {"scenario", args.compute.scenario},
                   {"seed", common.seed},
                   {"optimizer", optimizer_json(measure_options(common))},
                   {"inputs", {{"a", spec_json(base.a)}, {"b", spec_json(base.b)}}},
                   {"param", args.param},
                   {"rows", rows}};
    if (!common.noTiming) report["timing"] = {{"timestamp", timestamp_utc()}, {"wall_ms", elapsed_ms(begin)}};
    out << report.dump(2) << '\n';
    return kOk;
  }
  const int digits = common.csv ? std::numeric_limits<double>::max_digits10 : 10;
  if (common.csv) {
    out << "param,value,method,t2_bound,wall_ms\n";
  } else {
    out << std::left << std::setw(16) << args.param << std::setw(16) << "value" << std::setw(28) << "method"
        << std::setw(16) << "t2_bound" << "wall_ms\n";
  }
  for (const auto& row : rows) {
    const std::string t2 = row["t2_bound"].is_null() ? "" : fmt(row["t2_bound"].get<double>(), digits);
    const std::string ms = row.contains("wall_ms") ? fmt(row["wall_ms"].get<double>(), 6) : "";
    if (common.csv) {
      out << fmt(row["param"].get<double>(), digits) << ',' << fmt(row["value"].get<double>(), digits) << ','
          << row["method"].get<std::string>() << ',' << t2 << ',' << ms << '\n';
    } else {
      out << std::left << std::setw(16) << fmt(row["param"].get<double>(), 8) << std::setw(16)
          << fmt(row["value"].get<double>(), 10) << std::setw(28) << row["method"].get<std::string>() << std::setw(16)
          << t2 << ms << '\n';
    }
  }
  return kOk;
}

struct AuditArgs {
  CommonOptions common;
  int count = 100;
  std::string dims = "2x2";
  std::string rank = "full";
  std::string checks = "property_i,property_ii,property_iv,property_vi,bound_t2,thm4_consistency";
};

struct CheckTally {
  int passed = 0;
  int failed = 0;
  double worstSlack = std::numeric_limits<double>::infinity();
  std::vector<std::uint64_t> failingSeeds;

  void record(double slack, std::uint64_t seed) {
    worstSlack = std::min(worstSlack, slack);
    if (slack >= 0.0) {
      ++passed;
    } else {
      ++failed;
      failingSeeds.push_back(seed);
    }
  }
};

// Random weights on the probability simplex.
std::vector<double> simplex_point(int n, std::mt19937_64& gen) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> w(n);
  double total = 0.0;
  for (double& x : w) total += (x = ex(gen));
  for (double& x : w) x /= total;
  return w;
}

// Slack of one check on one sample; negative means the check failed.
double run_check(const std::string& check, const std::vector<int>& dims, int rank, std::uint64_t sampleSeed,
                 const MeasureOptions& baseOptions) {
  std::mt19937_64 gen(sampleSeed);
  MeasureOptions options = baseOptions;
  options.optimizer.seed = sampleSeed;
  const int total = dims[0] * dims[1];
  const int r = std::min(rank, total);
  auto random_pair = [&]() {
    DensityMatrix ab = states::random_density(dims, r, gen);
    DensityMatrix cd = states::random_density(dims, r, gen);
    return BilocalInput(std::move(ab), std::move(cd));
  };

  if (check == "property_i") {
    const DensityMatrix ab = tensor(states::random_density({dims[0]}, std::min(r, dims[0]), gen),
                                    states::random_density({dims[1]}, std::min(r, dims[1]), gen));
    const DensityMatrix cd = tensor(states::random_density({dims[0]}, std::min(r, dims[0]), gen),
                                    states::random_density({dims[1]}, std::min(r, dims[1]), gen));
    return 1e-9 - measures::minbs(BilocalInput(ab, cd), options).value;
  }
  if (check == "property_ii") {
    auto components = [&](int quantumDim, int classicalDim) {
      const auto w = simplex_point(classicalDim, gen);
      std::vector<states::ClassicalComponent> parts;
      for (int k = 0; k < classicalDim; ++k) parts.push_back({states::random_density({quantumDim}, quantumDim, gen), w[k], k});
      return parts;
    };
    const DensityMatrix ab = states::quantum_classical(components(dims[0], dims[1]), dims[1]);
    const DensityMatrix cd = states::classical_quantum(components(dims[1], dims[0]), dims[0]);
    return 1e-9 - measures::minbs(BilocalInput(ab, cd), options).value;
  }
  if (check == "property_iv") {
    const BilocalInput in = random_pair();
    const BilocalInput rotated(
        in.rhoAB.conjugated({states::haar_unitary(dims[0], gen), states::haar_unitary(dims[1], gen)}),
        in.rhoCD.conjugated({states::haar_unitary(dims[0], gen), states::haar_unitary(dims[1], gen)}));
    return 1e-7 - std::abs(measures::minbs(in, options).value - measures::minbs(rotated, options).value);
  }
  if (check == "property_vi") {
    const auto c = measures::property_vi_check(states::random_density(dims, r, gen), options);
    return c.lhs - (c.rhs - 1e-7);
  }
  if (check == "bound_t2") {
    const MeasureResult res = measures::minbs(random_pair(), options);
    return *res.bounds.t2Upper + 1e-8 - res.value;
  }
  if (check == "thm4_consistency") {
    const BilocalInput in = random_pair();
    const MeasureResult res = measures::minbs_both_nondegenerate(in, options);
    const CMatrix root = qmatrix::kron(in.rhoAB.sqrt(), in.rhoCD.sqrt());
    const double direct =
        1.0 - measures::trace_sum(root, in.m(), in.n() * in.u(), in.v(), res.optimalMeasurement->projectors());
    const double bound = measures::upper_bound_t2(in, options.tol);
    return std::min(1e-9 - std::abs(res.value - direct), bound + 1e-8 - res.value);
  }
  throw Error(ErrorKind::InvalidInput, "unknown check: " + check);
}

int cmd_audit(const AuditArgs& args, std::ostream& out) {
  const auto begin = Clock::now();
  if (args.count < 1) throw Error(ErrorKind::InvalidInput, "--count must be at least 1");
  json dimsJson = json::array();
  for (const auto& d : split(args.dims, 'x')) dimsJson.push_back(static_cast<int>(require_number(d, "--dims")));
  const std::vector<int> dims = dims_of(dimsJson);
  if (dims.size() != 2) throw Error(ErrorKind::InvalidInput, "--dims must name two local dimensions, e.g. 2x2");
  const int rank = args.rank == "full" ? dims[0] * dims[1] : static_cast<int>(require_number(args.rank, "--rank"));
  if (rank < 1) throw Error(ErrorKind::InvalidInput, "--rank must be positive or 'full'");
  const std::vector<std::string> checks = split(args.checks, ',');
  const std::vector<std::string> known{"property_i", "property_ii", "property_iv", "property_vi", "bound_t2",
                                       "thm4_consistency"};
  for (const auto& c : checks) {
    if (std::find(known.begin(), known.end(), c) == known.end()) throw Error(ErrorKind::InvalidInput, "unknown check: " + c);
  }

  const MeasureOptions options = measure_options(args.common);
  std::map<std::string, CheckTally> tallies;
  std::map<std::string, std::vector<std::string>> errors;
  for (const auto& check : checks) {
    CheckTally& tally = tallies[check];
    for (int i = 0; i < args.count; ++i) {
      const std::uint64_t sampleSeed = args.common.seed + static_cast<std::uint64_t>(i);
      double slack = -std::numeric_limits<double>::infinity();
      try {
        slack = run_check(check, dims, rank, sampleSeed, options);
      } catch (const Error& e) {
        // A sample the check cannot evaluate counts as a failure.
        errors[check].push_back(std::to_string(sampleSeed) + ": " + e.what());
      }
      tally.record(slack, sampleSeed);
    }
  }

  bool allPass = true;
  for (const auto& [name, t] : tallies) allPass = allPass && t.failed == 0;

  json report = {{"tool", kToolName},
                 {"version", kToolVersion},
                 {"command", "audit"},
                 {"seed", args.common.seed},
                 {"optimizer", optimizer_json(options)},
                 {"ensemble", {{"count", args.count}, {"dims", dims}, {"rank", rank}}},
                 {"passed", allPass}};
  json checksJson = json::object();
  for (const auto& [name, t] : tallies) {
    checksJson[name] = {{"passed", t.passed},
                        {"failed", t.failed},
                        {"worst_slack", finite_or_null(t.worstSlack)},
                        {"failing_seeds", t.failingSeeds}};
    if (errors.count(name)) checksJson[name]["errors"] = errors[name];
  }
  report["checks"] = checksJson;
  if (!args.common.noTiming) report["timing"] = {{"timestamp", timestamp_utc()}, {"wall_ms", elapsed_ms(begin)}};

  if (args.common.json) {
    out << report.dump(2) << '\n';
  } else if (args.common.csv) {
    out << "check,passed,failed,worst_slack,failing_seeds\n";
    for (const auto& [name, t] : tallies) {
      out << name << ',' << t.passed << ',' << t.failed << ','
          << (std::isfinite(t.worstSlack) ? fmt(t.worstSlack, std::numeric_limits<double>::max_digits10) : "") << ',';
      for (std::size_t k = 0; k < t.failingSeeds.size(); ++k) out << (k ? ";" : "") << t.failingSeeds[k];
      out << '\n';
    }
  } else {
    out << std::left << std::setw(20) << "check" << std::setw(10) << "passed" << std::setw(10) << "failed"
        << std::setw(16) << "worst_slack" << "failing_seeds\n";
    for (const auto& [name, t] : tallies) {
      out << std::left << std::setw(20) << name << std::setw(10) << t.passed << std::setw(10) << t.failed
          << std::setw(16) << (std::isfinite(t.worstSlack) ? fmt(t.worstSlack, 6) : "-");
      for (std::size_t k = 0; k < t.failingSeeds.size(); ++k) out << (k ? " " : "") << t.failingSeeds[k];
      out << '\n';
    }
    out << (allPass ? "all checks passed" : "some checks FAILED") << '\n';
  }
  return allPass ? kOk : kAuditFailure;
}

struct ValidateArgs {
  CommonOptions common;
  std::string a;
};

int cmd_validate(const ValidateArgs& args, std::ostream& out) {
  const StateSpec spec = parse_state_spec(args.a);
  const ValidationReport report = validate_spec(spec, args.common.seed);
  if (args.common.json) {
    out << json{{"input", spec.source}, {"report", validation_json(report)}}.dump(2) << '\n';
  } else {
    print_validation(report, out);
    out << (report.ok() ? "valid density matrix" : "INVALID") << '\n';
  }
  return report.ok() ? kOk : kInvalidInput;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API

StateSpec parse_state_spec(const std::string& text) {
  if (text.rfind("family=", 0) == 0) return parse_inline(text);
  json j = read_json_file(text);
  if (!j.is_object()) throw Error(ErrorKind::InvalidInput, "state file must hold a JSON object");
  if (j.contains("family")) {
    if (!j.at("family").is_string()) throw Error(ErrorKind::InvalidInput, "family must be a string");
    if (!j.contains("params")) j["params"] = json::object();
    return {json{{"family", j.at("family")}, {"params", j.at("params")}}};
  }
  if (!j.contains("dims") || !j.contains("matrix")) {
    throw Error(ErrorKind::InvalidInput, "state file needs either family/params or dims/matrix");
  }
  return {json{{"dims", j.at("dims")}, {"matrix", j.at("matrix")}}};
}

CMatrix matrix_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw Error(ErrorKind::InvalidInput, "matrix must be a nonempty list of rows");
  const std::size_t n = rows.size();
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i].is_array() || rows[i].size() != n) throw Error(ErrorKind::InvalidInput, "matrix must be square");
    for (std::size_t j = 0; j < n; ++j) {
      const json& e = rows[i][j];
      if (e.is_number()) {
        m(i, j) = e.get<double>();
      } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
        m(i, j) = Complex(e[0].get<double>(), e[1].get<double>());
      } else {
        throw Error(ErrorKind::InvalidInput, "matrix entries must be numbers or [re, im] pairs");
      }
    }
  }
  return m;
}

json matrix_to_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

DensityMatrix resolve_state(const StateSpec& spec, std::uint64_t seed, int slot) {
  const json& s = spec.source;
  if (s.contains("family")) {
    return resolve_family(s.at("family").get<std::string>(), s.value("params", json::object()), seed, slot);
  }
  const std::vector<int> dims = dims_of(s.at("dims"));
  const CMatrix m = matrix_from_json(s.at("matrix"));
  const ValidationReport report = validate(m, dims);
  if (!report.ok()) {
    std::string msg;
    for (const auto& f : report.failures()) msg += (msg.empty() ? "" : "; ") + f;
    ErrorKind kind = ErrorKind::InvalidInput;
    if (!report.dimsMatch) kind = ErrorKind::DimensionMismatch;
    else if (!report.hermitian) kind = ErrorKind::NotHermitian;
    else if (!report.positive) kind = ErrorKind::NotPSD;
    throw InvalidStateError(kind, "invalid density matrix: " + msg, report);
  }
  return DensityMatrix(m, dims);
}

ValidationReport validate_spec(const StateSpec& spec, std::uint64_t seed) {
  if (spec.source.contains("family")) {
    const DensityMatrix rho = resolve_state(spec, seed);
    return validate(rho.matrix(), rho.dims());
  }
  return validate(matrix_from_json(spec.source.at("matrix")), dims_of(spec.source.at("dims")));
}

json to_json(const RunReport& r) {
  json j = {{"tool", r.tool},
            {"version", r.version},
            {"command", r.command},
            {"measure", r.measure},
            {"scenario", r.scenario},
            {"seed", r.seed},
            {"optimizer", r.optimizer},
            {"inputs", r.inputs}};
  json result = {{"value", r.value},
                 {"method", r.method},
                 {"bounds",
                  {{"t2_upper", r.t2Upper ? json(*r.t2Upper) : json(nullptr)},
                   {"t3_upper", r.t3Upper ? json(*r.t3Upper) : json(nullptr)}}},
                 {"diagnostics", r.diagnostics},
                 {"warnings", r.warnings},
                 {"measurement", r.measurement}};
  j["result"] = result;
  if (!r.timing.is_null()) j["timing"] = r.timing;
  return j;
}

RunReport report_from_json(const json& j) {
  RunReport r;
  r.tool = j.at("tool").get<std::string>();
  r.version = j.at("version").get<std::string>();
  r.command = j.at("command").get<std::string>();
  r.measure = j.at("measure").get<std::string>();
  r.scenario = j.at("scenario").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.optimizer = j.at("optimizer");
  r.inputs = j.at("inputs");
  const json& res = j.at("result");
  r.value = res.at("value").get<double>();
  r.method = res.at("method").get<std::string>();
  const json& b = res.at("bounds");
  if (!b.at("t2_upper").is_null()) r.t2Upper = b.at("t2_upper").get<double>();
  if (!b.at("t3_upper").is_null()) r.t3Upper = b.at("t3_upper").get<double>();
  r.diagnostics = res.at("diagnostics").get<std::map<std::string, double>>();
  r.warnings = res.at("warnings").get<std::vector<std::string>>();
  r.measurement = res.at("measurement");
  if (j.contains("timing")) r.timing = j.at("timing");
  return r;
}

int exit_code_for(ErrorKind kind) {
  return kind == ErrorKind::NumericalFailure ? kNumericalFailure : kInvalidInput;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Skew-information measurement-induced nonlocality for bilocal states", kToolName};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  ComputeArgs compute;
  auto* c = app.add_subcommand("compute", "Evaluate one measure on one input");
  add_common(c, compute.common);
  c->add_option("--measure", compute.measure, "skew | min_s | minbs | bell_diagonal_closed")
      ->check(CLI::IsMember({"skew", "min_s", "minbs", "bell_diagonal_closed"}))
      ->capture_default_str();
  c->add_option("--scenario", compute.scenario, "pair (rho_AB (x) rho_CD) | swapped-copy (rho_BA (x) rho_AB)")
      ->check(CLI::IsMember({"pair", "swapped-copy"}))
      ->capture_default_str();
  c->add_option("--a", compute.a, "First source: inline family spec or JSON file")->required();
  c->add_option("--b", compute.b, "Second source for the pair scenario");
  c->add_option("--observable", compute.observable, "Observable for skew: pauli:XZ, inline JSON or a file");

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "Evaluate a measure along a one-parameter family");
  add_common(s, sweep.compute.common);
  s->add_option("--measure", sweep.compute.measure, "min_s | minbs | bell_diagonal_closed")
      ->check(CLI::IsMember({"min_s", "minbs", "bell_diagonal_closed"}))
      ->capture_default_str();
  s->add_option("--scenario", sweep.compute.scenario, "pair | swapped-copy")
      ->check(CLI::IsMember({"pair", "swapped-copy"}))
      ->capture_default_str();
  s->add_option("--a", sweep.compute.a, "Family template, e.g. family=werner")->required();
  s->add_option("--b", sweep.compute.b, "Fixed second source (pair scenario; defaults to the swept state)");
  s->add_option("--param", sweep.param, "Parameter to vary")->required();
  s->add_option("--start", sweep.start, "First grid value (fractions like -1/3 accepted)")->required();
  s->add_option("--stop", sweep.stop, "Last grid value")->required();
  s->add_option("--steps", sweep.steps, "Number of grid points")->capture_default_str();

  AuditArgs audit;
  auto* a = app.add_subcommand("audit", "Check structural properties on a seeded random ensemble");
  add_common(a, audit.common);
  a->add_option("--count", audit.count, "Samples per check")->capture_default_str();
  a->add_option("--dims", audit.dims, "Local dimensions of each source, e.g. 2x2")->capture_default_str();
  a->add_option("--rank", audit.rank, "Rank of random sources or 'full'")->capture_default_str();
  a->add_option("--checks", audit.checks, "Comma-separated subset of the available checks")->capture_default_str();

  ValidateArgs validateArgs;
  auto* v = app.add_subcommand("validate", "Check that a state spec is a density matrix");
  add_common(v, validateArgs.common);
  v->add_option("--a", validateArgs.a, "State spec")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidInput;
  }

  try {
    if (c->parsed()) return cmd_compute(compute, out);
    if (s->parsed()) return cmd_sweep(sweep, out);
    if (a->parsed()) return cmd_audit(audit, out);
    if (v->parsed()) return cmd_validate(validateArgs, out);
  } catch (const InvalidStateError& e) {
    err << "error: " << e.what() << '\n';
    print_validation(e.report(), err);
    return kInvalidInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed input: " << e.what() << '\n';
    return kInvalidInput;
  }
  return kInvalidInput;
}

}  // namespace minbs::cli
