#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "minbs/measures.hpp"

using namespace minbs;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string write_temp(const std::string& name, const json& content) {
  const std::string path = std::string(P_tmpdir) + "/minbs_test_" + name + ".json";
  std::ofstream(path) << content.dump();
  return path;
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream is(line);
  for (std::string f; std::getline(is, f, ',');) fields.push_back(f);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool all_finite(const json& j) {
  if (j.is_number()) return std::isfinite(j.get<double>());
  if (j.is_structured()) {
    for (const auto& v : j) {
      if (!all_finite(v)) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("compute: two Phi+ sources") {
  const Run r = run_cli({"compute", "--measure", "minbs", "--a", "family=bell:phi+", "--b", "family=bell:phi+", "--json"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["result"]["value"].get<double>() == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(j["result"]["method"] == "pure_closed_form");
  CHECK(j.contains("timing"));
  CHECK(all_finite(j));
}

TEST_CASE("compute: classical separable pair") {
  const Run r = run_cli({"compute", "--measure", "minbs", "--a", "family=classical_separable", "--b",
                         "family=classical_separable", "--json", "--restarts", "8"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(std::abs(j["result"]["value"].get<double>() - 0.75) < 1e-6);
  CHECK(j["result"]["method"] == "optimizer");
  CHECK(j["optimizer"]["restarts"] == 8);
}

TEST_CASE("compute: one-sided measure on a product-state file is zero") {
  CMatrix a = CMatrix::Zero(2, 2), b = CMatrix::Zero(2, 2);
  a(0, 0) = 0.7;
  a(1, 1) = 0.3;
  b << 0.6, Complex(0.1, 0.2), Complex(0.1, -0.2), 0.4;
  const std::string path =
      write_temp("product", json{{"dims", {2, 2}}, {"matrix", cli::matrix_to_json(qmatrix::kron(a, b))}});
  const Run r = run_cli({"compute", "--measure", "min_s", "--a", path, "--json"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["result"]["value"].get<double>() < 1e-12);
  std::remove(path.c_str());
}

TEST_CASE("compute: skew information with a Pauli observable") {
  const Run r = run_cli({"compute", "--measure", "skew", "--a", "family=bell", "--observable", "pauli:ZI", "--json"});
  REQUIRE(r.code == 0);
  // I(Phi+, Z (x) I) = 1: Phi+ is pure and <Z (x) I> = 0.
  CHECK(json::parse(r.out)["result"]["value"].get<double>() == doctest::Approx(1.0));
  const Run inline_obs =
      run_cli({"compute", "--measure", "skew", "--a", "family=bell", "--observable",
               "[[1,0,0,0],[0,1,0,0],[0,0,-1,0],[0,0,0,-1]]", "--json"});
  CHECK(json::parse(inline_obs.out)["result"]["value"].get<double>() == doctest::Approx(1.0));
  CHECK(run_cli({"compute", "--measure", "skew", "--a", "family=bell"}).code == 2);
}

TEST_CASE("compute: swapped-copy scenario and the Bell-diagonal closed form") {
  const Run opt = run_cli({"compute", "--measure", "minbs", "--scenario", "swapped-copy", "--a",
                           "family=bell_diagonal,l1=0.7,l2=0.1,l3=0.1,l4=rest", "--json", "--restarts", "8"});
  const Run closed = run_cli({"compute", "--measure", "bell_diagonal_closed", "--a",
                              "family=bell_diagonal,l1=0.7,l2=0.1,l3=0.1,l4=rest", "--json"});
  REQUIRE(opt.code == 0);
  REQUIRE(closed.code == 0);
  const double expected = measures::bell_diagonal_minbs({0.7, 0.1, 0.1, 0.1});
  CHECK(json::parse(closed.out)["result"]["value"].get<double>() == doctest::Approx(expected).epsilon(1e-12));
  CHECK(json::parse(opt.out)["result"]["value"].get<double>() >= expected - 1e-9);
  CHECK(run_cli({"compute", "--measure", "bell_diagonal_closed", "--a", "family=random"}).code == 2);
}

TEST_CASE("exit codes: invalid inputs") {
  const Run werner = run_cli({"compute", "--a", "family=werner,v=2", "--b", "family=bell"});
  CHECK(werner.code == 2);
  CHECK(werner.err.find("OutOfRange") != std::string::npos);

  const std::string bad = write_temp("not_psd", json{{"dims", {2}}, {"matrix", {{1.5, 0}, {0, -0.5}}}});
  const Run psd = run_cli({"compute", "--measure", "min_s", "--a", bad});
  CHECK(psd.code == 2);
  CHECK(psd.err.find("validation report") != std::string::npos);
  CHECK(psd.err.find("min eigenvalue -0.5") != std::string::npos);
  CHECK(run_cli({"validate", "--a", bad}).code == 2);
  std::remove(bad.c_str());

  CHECK(run_cli({"compute", "--a", "family=nonsense"}).code == 2);
  CHECK(run_cli({"compute", "--a", "family=bell"}).code == 2);  // pair scenario without --b
  CHECK(run_cli({"compute", "--a", "/nonexistent/state.json"}).code == 2);
  CHECK(run_cli({"compute", "--a", "family=bell_diagonal,l1=0.9,l2=0.9"}).code == 2);
  CHECK(run_cli({"compute", "--unknown-flag"}).code == 2);
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"--help"}).code == 0);

  CHECK(cli::exit_code_for(ErrorKind::NumericalFailure) == 3);
  CHECK(cli::exit_code_for(ErrorKind::NotPSD) == 2);
  CHECK(cli::exit_code_for(ErrorKind::DimensionMismatch) == 2);
}

TEST_CASE("validate: valid family and matrix file") {
  CHECK(run_cli({"validate", "--a", "family=werner,v=1/2"}).code == 0);
  const Run j = run_cli({"validate", "--a", "family=random,dims=2x3,rank=2,seed=4", "--json"});
  REQUIRE(j.code == 0);
  CHECK(json::parse(j.out)["report"]["ok"] == true);
}

TEST_CASE("RunReport: JSON round trip is exact") {
  const Run r = run_cli({"compute", "--measure", "minbs", "--a", "family=random,dims=2x2", "--b",
                         "family=werner,v=0.3", "--json", "--restarts", "4"});
  REQUIRE(r.code == 0);
  const json first = json::parse(r.out);
  const cli::RunReport report = cli::report_from_json(first);
  CHECK(cli::to_json(report) == first);
  CHECK(cli::to_json(report).dump(2) + "\n" == r.out);
  CHECK(cli::report_from_json(cli::to_json(report)) == report);
  CHECK(all_finite(first));
}

TEST_CASE("determinism: repeated runs are byte-identical without timing") {
  const std::vector<std::string> compute{"compute", "--measure", "minbs", "--a", "family=random,dims=2x2,rank=2",
                                         "--b", "family=random,dims=2x2,rank=2", "--seed", "17", "--json", "--no-timing"};
  const Run a = run_cli(compute), b = run_cli(compute);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK_FALSE(json::parse(a.out).contains("timing"));

  const std::vector<std::string> audit{"audit", "--count", "3", "--seed", "5", "--json", "--no-timing"};
  const Run c = run_cli(audit), d = run_cli(audit);
  CHECK(c.code == 0);
  CHECK(c.out == d.out);

  // With timing on, only the timing field differs.
  auto strip = [](const std::string& text) {
    json j = json::parse(text);
    j.erase("timing");
    return j.dump();
  };
  std::vector<std::string> timed(compute.begin(), compute.end() - 1);
  CHECK(strip(run_cli(timed).out) == strip(run_cli(timed).out));
  CHECK(strip(run_cli(timed).out) == strip(a.out));
}

TEST_CASE("sweep: Werner family in the swapped-copy scenario") {
  const Run r = run_cli({"sweep", "--a", "family=werner", "--param", "v", "--start", "-1/3", "--stop", "1", "--steps",
                         "41", "--scenario", "swapped-copy", "--csv", "--restarts", "8"});
  REQUIRE(r.code == 0);
  const auto lines = csv_lines(r.out);
  REQUIRE(lines.size() == 42);
  CHECK(lines[0] == "param,value,method,t2_bound,wall_ms");
  bool sawZero = false;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto f = csv_fields(lines[k]);
    REQUIRE(f.size() == 5);
    const double v = std::stod(f[0]), value = std::stod(f[1]);
    CHECK(value <= std::stod(f[3]) + 1e-8);
    if (std::abs(v) < 1e-12) {
      sawZero = true;
      CHECK(value < 1e-9);
    }
  }
  CHECK(sawZero);
  const auto last = csv_fields(lines.back());
  CHECK(std::stod(last[0]) == 1.0);
  CHECK(std::abs(std::stod(last[1]) - 0.75) < 1e-12);
}

TEST_CASE("sweep: Bell-diagonal edge") {
  const std::vector<std::string> base{"sweep", "--a", "family=bell_diagonal,l2=rest", "--param", "l1", "--start", "0",
                                      "--stop", "1", "--steps", "5", "--scenario", "swapped-copy", "--csv",
                                      "--restarts", "8", "--no-timing"};
  std::vector<std::string> closed = base;
  closed.insert(closed.end(), {"--measure", "bell_diagonal_closed"});
  const auto closedLines = csv_lines(run_cli(closed).out);
  REQUIRE(closedLines.size() == 6);
  CHECK(std::stod(csv_fields(closedLines[3])[1]) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(csv_fields(closedLines[3])[4].empty());

  // The search finds more than the Bell-basis measurement in the interior.
  const auto optLines = csv_lines(run_cli(base).out);
  REQUIRE(optLines.size() == 6);
  for (std::size_t k = 1; k < 6; ++k) {
    CHECK(std::stod(csv_fields(optLines[k])[1]) >= std::stod(csv_fields(closedLines[k])[1]) - 1e-9);
  }
}

TEST_CASE("sweep: pure Schmidt family follows the pure closed form") {
  const Run r = run_cli({"sweep", "--a", "family=pure_schmidt", "--param", "l", "--start", "0", "--stop", "1",
                         "--steps", "11", "--json", "--no-timing"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  REQUIRE(j["rows"].size() == 11);
  for (const auto& row : j["rows"]) {
    const double l = row["param"].get<double>();
    const double m = l * l * l * l + (1 - l * l) * (1 - l * l);
    CHECK(row["value"].get<double>() == doctest::Approx(1.0 - m * m).epsilon(1e-9));
  }
  CHECK(run_cli({"sweep", "--a", "family=pure_schmidt", "--param", "l", "--start", "0", "--stop", "2", "--steps", "3"})
            .code == 2);
}

TEST_CASE("audit: ensembles pass and report counts") {
  const Run r = run_cli({"audit", "--count", "10", "--checks", "bound_t2,property_i,property_vi", "--json",
                         "--restarts", "8", "--no-timing"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["passed"] == true);
  for (const char* name : {"bound_t2", "property_i", "property_vi"}) {
    CHECK(j["checks"][name]["passed"] == 10);
    CHECK(j["checks"][name]["failed"] == 0);
    CHECK(j["checks"][name]["worst_slack"].get<double>() >= 0.0);
    CHECK(j["checks"][name]["failing_seeds"].empty());
  }
  CHECK(run_cli({"audit", "--checks", "nonsense"}).code == 2);
  CHECK(run_cli({"audit", "--count", "0"}).code == 2);
}

TEST_CASE("state specs: inline parsing and file forms") {
  const auto spec = cli::parse_state_spec("family=bell_diagonal,l1=1/2,l2=rest,l3=0,l4=0");
  CHECK(spec.source["family"] == "bell_diagonal");
  CHECK(spec.source["params"]["l1"].get<double>() == 0.5);
  CHECK(spec.source["params"]["l2"] == "rest");
  const DensityMatrix rho = cli::resolve_state(spec, 0);
  CHECK((rho.matrix() - states::classical_separable().matrix()).cwiseAbs().maxCoeff() < 1e-15);

  const auto pure = cli::parse_state_spec("family=pure_schmidt,coefficients=0.6;0.8");
  CHECK(cli::resolve_state(pure, 0).max_eigenvalue() == doctest::Approx(1.0));

  const std::string path = write_temp("family", json{{"family", "werner"}, {"params", {{"v", 0.5}}}});
  const DensityMatrix w = cli::resolve_state(cli::parse_state_spec(path), 0);
  CHECK((w.matrix() - states::werner(0.5).matrix()).cwiseAbs().maxCoeff() < 1e-15);
  std::remove(path.c_str());

  // Random sources differ between the two slots unless a seed is pinned.
  const auto random = cli::parse_state_spec("family=random");
  CHECK((cli::resolve_state(random, 3, 0).matrix() - cli::resolve_state(random, 3, 1).matrix()).norm() > 1e-3);
  CHECK((cli::resolve_state(random, 3, 0).matrix() - cli::resolve_state(random, 3, 0).matrix()).norm() == 0.0);

  const CMatrix m = states::random_density({2, 2}, 3, 9ull).matrix();
  CHECK((cli::matrix_from_json(cli::matrix_to_json(m)) - m).norm() == 0.0);
}
