#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "minbs/error.hpp"
#include "minbs/measures.hpp"
#include "minbs/optimizer.hpp"
#include "test_support.hpp"

using namespace minbs;
using minbs::testing::max_abs;

namespace {

CMatrix diag(std::initializer_list<double> values) {
  CMatrix m = CMatrix::Zero(values.size(), values.size());
  int k = 0;
  for (double v : values) {
    m(k, k) = v;
    ++k;
  }
  return m;
}

// sum_k tr(S (Pi_k (x) I) S (Pi_k (x) I)) for a qubit measurement on the first
// party, built from explicit Kronecker products.
double qubit_first_party_objective(const CMatrix& root, int right, double theta, double phi) {
  const auto [p0, p1] = testing::qubit_projectors(theta, phi);
  double total = 0.0;
  for (const CMatrix& p : {p0, p1}) {
    const CMatrix big = testing::naive_kron(p, CMatrix::Identity(right, right));
    total += (root * big * root * big).trace().real();
  }
  return total;
}

// Grid scan over the Bloch sphere followed by a shrinking local grid.
double qubit_scan_minimum(const CMatrix& root, int right) {
  const double pi = std::numbers::pi;
  double bestT = 0.0, bestP = 0.0;
  double best = qubit_first_party_objective(root, right, 0.0, 0.0);
  for (int i = 0; i <= 90; ++i) {
    for (int j = 0; j < 180; ++j) {
      const double t = pi * i / 90.0;
      const double p = 2.0 * pi * j / 180.0;
      const double v = qubit_first_party_objective(root, right, t, p);
      if (v < best) {
        best = v;
        bestT = t;
        bestP = p;
      }
    }
  }
  double span = pi / 90.0;
  for (int round = 0; round < 30; ++round) {
    const double t0 = bestT, p0 = bestP;
    for (int i = -5; i <= 5; ++i) {
      for (int j = -5; j <= 5; ++j) {
        const double t = t0 + span * i / 5.0;
        const double p = p0 + span * j / 5.0;
        const double v = qubit_first_party_objective(root, right, t, p);
        if (v < best) {
          best = v;
          bestT = t;
          bestP = p;
        }
      }
    }
    span *= 0.5;
  }
  return best;
}

OptimizerConfig quick(int restarts = 8) {
  OptimizerConfig cfg;
  cfg.restarts = restarts;
  return cfg;
}

}  // namespace

TEST_CASE("invariant_blocks: degeneracy patterns") {
  auto sizes = [](const std::vector<InvariantBlock>& blocks) {
    std::vector<long> out;
    for (const auto& b : blocks) out.push_back(static_cast<long>(b.basis.cols()));
    return out;
  };
  CHECK(sizes(invariant_blocks(CMatrix::Identity(4, 4) / 4.0, 1e-8)) == std::vector<long>{4});
  CHECK(sizes(invariant_blocks(diag({0.5, 0.3, 0.15, 0.05}), 1e-8)) == std::vector<long>{1, 1, 1, 1});
  const auto pairs = invariant_blocks(diag({0.4, 0.4, 0.1, 0.1}), 1e-8);
  CHECK(sizes(pairs) == std::vector<long>{2, 2});
  CHECK(pairs[0].eigenvalue == doctest::Approx(0.1));
  CHECK(pairs[1].eigenvalue == doctest::Approx(0.4));
}

TEST_CASE("measurement_from_basis: accepts block-aligned bases, rejects straddling ones") {
  const CMatrix ref = diag({0.4, 0.4, 0.1, 0.1});
  const auto blocks = invariant_blocks(ref, 1e-8);
  std::mt19937_64 gen(2);
  CMatrix aligned = CMatrix::Zero(4, 4);
  aligned.block(0, 0, 2, 2) = testing::random_unitary(2, gen);
  aligned.block(2, 2, 2, 2) = testing::random_unitary(2, gen);
  const auto m = measurement_from_basis(blocks, aligned);
  const auto audit = audit_measurement(m, ref);
  CHECK(audit.completeness < 1e-12);
  CHECK(audit.disturbance < 1e-12);
  CHECK(audit.orthonormality < 1e-12);
  CHECK_THROWS_AS(measurement_from_basis(blocks, testing::random_unitary(4, gen)), Error);
}

TEST_CASE("SkewObjective: Bell-basis measurement on two Phi+ copies gives 1/4") {
  const DensityMatrix phi = states::bell(states::BellKind::PhiPlus);
  const CMatrix root = qmatrix::kron(phi.sqrt(), phi.sqrt());
  CMatrix bellBasis(4, 4);
  for (int k = 0; k < 4; ++k) bellBasis.col(k) = states::bell_vector(static_cast<states::BellKind>(k));
  const SkewObjective objective(root, 2, 4, 2);
  CHECK(objective.evaluate(bellBasis) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(measures::trace_sum(root, 2, 4, 2, operator_basis::projectors_from_basis(bellBasis)) ==
        doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("SkewObjective: Hadamard product measurement on the classical separable pair gives 1/4") {
  const DensityMatrix cs = states::classical_separable();
  const CMatrix root = qmatrix::kron(cs.sqrt(), cs.sqrt());
  CMatrix h(2, 2);
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  const SkewObjective objective(root, 2, 4, 2);
  CHECK(std::abs(objective.evaluate(qmatrix::kron(h, h)) - 0.25) < 1e-14);
  // Computational basis leaves the state untouched.
  CHECK(objective.evaluate(CMatrix::Identity(4, 4)) == doctest::Approx(1.0));
}

TEST_CASE("SkewObjective: agrees with the explicit trace sum on random inputs") {
  std::mt19937_64 gen(19);
  for (int trial = 0; trial < 20; ++trial) {
    const int left = 1 + trial % 3, middle = 2 + trial % 3, right = 1 + (trial / 3) % 2;
    const DensityMatrix rho = states::random_density({left * middle * right}, std::min(left * middle * right, 1 + trial % 4), gen);
    const CMatrix root = rho.sqrt();
    const CMatrix basis = testing::random_unitary(middle, gen);
    const SkewObjective objective(root, left, middle, right);
    CHECK(objective.evaluate(basis) ==
          doctest::Approx(measures::trace_sum(root, left, middle, right, operator_basis::projectors_from_basis(basis)))
              .epsilon(1e-12));
  }
  CHECK_THROWS_AS(SkewObjective(CMatrix::Identity(6, 6), 2, 2, 2), Error);
}

TEST_CASE("maximize_minbs: Phi+ pair reaches 3/4") {
  const DensityMatrix phi = states::bell(states::BellKind::PhiPlus);
  const MeasureResult r = maximize_minbs(BilocalInput(phi, phi), quick());
  CHECK(std::abs(r.value - 0.75) < 1e-6);
  CHECK(r.method == Method::Optimizer);
  REQUIRE(r.optimalMeasurement.has_value());
  const CMatrix rhoBC = CMatrix::Identity(4, 4) / 4.0;
  const auto audit = audit_measurement(*r.optimalMeasurement, rhoBC);
  CHECK(audit.completeness < 1e-10);
  CHECK(audit.disturbance < 1e-9);
}

TEST_CASE("maximize_minbs: nondegenerate marginals leave nothing to search") {
  const DensityMatrix ab = states::random_density({2, 2}, 4, 41ull);
  const DensityMatrix cd = states::random_density({2, 2}, 4, 42ull);
  const BilocalInput in(ab, cd);
  const MeasureResult opt = maximize_minbs(in, quick());
  CHECK(opt.diagnostics.at("objective_evaluations") == 1.0);
  const MeasureResult closed = measures::minbs_both_nondegenerate(in);
  CHECK(std::abs(opt.value - closed.value) < 1e-12);
}

TEST_CASE("maximize_minbs: deterministic for a fixed seed, independent of thread count") {
  const DensityMatrix cs = states::classical_separable();
  const BilocalInput in(cs, cs);
  OptimizerConfig cfg = quick(6);
  cfg.seed = 1234;
  const MeasureResult a = maximize_minbs(in, cfg);
  const MeasureResult b = maximize_minbs(in, cfg);
  cfg.threads = 3;
  const MeasureResult c = maximize_minbs(in, cfg);
  CHECK(a.value == b.value);
  CHECK(a.value == c.value);
  CHECK(max_abs(a.optimalMeasurement->basis() - b.optimalMeasurement->basis()) == 0.0);
  CHECK(max_abs(a.optimalMeasurement->basis() - c.optimalMeasurement->basis()) == 0.0);
  CHECK(a.diagnostics == c.diagnostics);
  CHECK(std::abs(a.value - 0.75) < 1e-6);
}

TEST_CASE("minimize_objective: refinement never increases the objective") {
  const DensityMatrix ab = states::random_density({2, 2}, 3, 8ull);
  const DensityMatrix cd = states::random_density({2, 2}, 2, 9ull);
  const CMatrix root = qmatrix::kron(ab.sqrt(), cd.sqrt());
  const SkewObjective objective(root, 2, 4, 2);
  const std::vector<InvariantBlock> whole = invariant_blocks(CMatrix::Identity(4, 4), 1e-8);
  double previous = std::numeric_limits<double>::infinity();
  for (int sweeps = 0; sweeps <= 8; ++sweeps) {
    OptimizerConfig cfg = quick(1);
    cfg.maxIterations = sweeps;
    cfg.seed = 5;
    const double value = minimize_objective(objective, whole, cfg).bestObjective;
    CHECK(value <= previous + 1e-13);
    previous = value;
  }
}

TEST_CASE("minimize_objective: audit mode checks every accepted step") {
  const DensityMatrix cs = states::classical_separable();
  OptimizerConfig cfg = quick(3);
  cfg.auditEveryStep = true;
  const MeasureResult r = maximize_minbs(BilocalInput(cs, cs), cfg);
  CHECK(r.diagnostics.at("measurement_disturbance") < 1e-9);
  OptimizerConfig none = quick(0);
  const SkewObjective objective(qmatrix::kron(cs.sqrt(), cs.sqrt()), 2, 4, 2);
  CHECK_THROWS_AS(minimize_objective(objective, invariant_blocks(CMatrix::Identity(4, 4), 1e-8), none), Error);
}

TEST_CASE("maximize_min_s: Phi+ gives 1/2, matching a Bloch-sphere scan") {
  const DensityMatrix phi = states::bell(states::BellKind::PhiPlus);
  const MeasureResult r = maximize_min_s(phi, quick());
  const double oracle = 1.0 - qubit_scan_minimum(phi.sqrt(), 2);
  CHECK(oracle == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(std::abs(r.value - 0.5) < 1e-6);
}

TEST_CASE("maximize_min_s: product state gives 0") {
  const DensityMatrix prod = tensor(states::maximally_mixed(2), states::random_density({2}, 2, 3ull));
  CHECK(maximize_min_s(prod, quick()).value < 1e-9);
}

TEST_CASE("maximize_min_s: classical-quantum state with degenerate marginal is positive") {
  CMatrix plus(2, 2);
  plus << 0.5, 0.5, 0.5, 0.5;
  CMatrix zero = CMatrix::Zero(2, 2);
  zero(0, 0) = 1.0;
  const DensityMatrix cq = states::classical_quantum(
      {{DensityMatrix(zero, {2}), 0.5, 0}, {DensityMatrix(plus, {2}), 0.5, 1}}, 2);
  const MeasureResult r = maximize_min_s(cq, quick());
  const double oracle = 1.0 - qubit_scan_minimum(cq.sqrt(), 2);
  CHECK(r.value > 1e-3);
  CHECK(std::abs(r.value - oracle) < 1e-6);
}

TEST_CASE("maximize_min_s: random degenerate-marginal states match the scan oracle") {
  std::mt19937_64 gen(91);
  for (int trial = 0; trial < 5; ++trial) {
    // Filter a random state so that its first marginal becomes exactly I/2.
    const DensityMatrix raw = states::random_density({2, 2}, 4, gen);
    const CMatrix rhoA = raw.marginal({0}).matrix();
    const CMatrix g = qmatrix::kron(qmatrix::spectral_apply(qmatrix::hermitian_eig(rhoA),
                                                            [](double x) { return 1.0 / std::sqrt(2.0 * x); }),
                                    CMatrix::Identity(2, 2));
    CMatrix filtered = g * raw.matrix() * g.adjoint();
    filtered = (filtered + filtered.adjoint()) / 2.0;
    const DensityMatrix rho(filtered, {2, 2});
    REQUIRE(max_abs(rho.marginal({0}).matrix() - CMatrix::Identity(2, 2) / 2.0) < 1e-12);
    const MeasureResult r = maximize_min_s(rho, quick());
    CHECK(std::abs(r.value - (1.0 - qubit_scan_minimum(rho.sqrt(), 2))) < 1e-6);
  }
}
