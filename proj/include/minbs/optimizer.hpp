#pragma once

// Search over rank-1 von Neumann measurements that leave a reference state
// invariant. Such measurements are exactly the bases obtained by rotating each
// eigenspace of the reference independently, so the search runs over one
// unitary per degenerate eigenspace and never leaves the admissible set.

#include <cstdint>
#include <vector>

#include "minbs/measure_result.hpp"
#include "minbs/qmatrix.hpp"
#include "minbs/states.hpp"

namespace minbs {

struct OptimizerConfig {
  int restarts = 32;
  int maxIterations = 2000;  // full Givens sweeps per restart
  double stepTolerance = 1e-10;
  double valueTolerance = 1e-12;
  std::uint64_t seed = 0;
  int gridPoints = 64;
  int threads = 1;           // 0 = hardware concurrency
  bool auditEveryStep = false;
};

/// Eigenvalues of the reference grouped so that adjacent eigenvalues closer
/// than `gapTolerance` share a block. Blocks are ordered by ascending eigenvalue.
std::vector<InvariantBlock> invariant_blocks(const CMatrix& rhoRef, double gapTolerance,
                                             const Tolerances& tol = kDefaultTolerances);

/// Absolute gap tolerance for a spectrum: tol.degeneracyGap * max(1, range).
double gap_tolerance(const RVector& ascendingEigenvalues, double relativeGap);

/// Measurement whose basis is `basis` (columns), expressed against `blocks`.
/// Throws InvalidMeasurement if a column is not contained in one block.
InvariantMeasurement measurement_from_basis(std::vector<InvariantBlock> blocks, const CMatrix& basis,
                                            const Tolerances& tol = kDefaultTolerances);

/// Measurement given by the block eigenbases themselves (identity rotations).
InvariantMeasurement eigenbasis_measurement(std::vector<InvariantBlock> blocks);

struct MeasurementAudit {
  double orthonormality = 0.0;  // max |B^dagger B - I|
  double completeness = 0.0;    // max |sum Pi - I|
  double disturbance = 0.0;     // max |sum Pi rho Pi - rho|
};

MeasurementAudit audit_measurement(const InvariantMeasurement& measurement, const CMatrix& rhoRef);

/// sum_g tr(S P_g S P_g) with P_g = I_left (x) |e_g><e_g| (x) I_right, where
/// S is the square root of a state on (left, middle, right). Internally S is
/// cut into middle x middle blocks so each evaluation is a handful of
/// quadratic forms.
class SkewObjective {
 public:
  SkewObjective(const CMatrix& sqrtRho, int left, int middle, int right);

  [[nodiscard]] int middle() const { return middle_; }
  [[nodiscard]] double evaluate(const CMatrix& basis) const;

  /// Quadratic forms (e_p^dag B e_p, e_p^dag B e_q, e_q^dag B e_p, e_q^dag B e_q)
  /// for every stored block; input to the pairwise line scans.
  struct PairForms {
    std::vector<Complex> pp, pq, qp, qq;
    std::vector<double> weight;
  };
  [[nodiscard]] PairForms pair_forms(const CVector& ep, const CVector& eq) const;

 private:
  int middle_;
  std::vector<CMatrix> blocks_;
  std::vector<double> weights_;
};

struct OptimizationOutcome {
  double bestObjective = 0.0;
  InvariantMeasurement measurement;
  std::vector<double> restartObjectives;
  int bestRestart = 0;
  long long evaluations = 0;
};

/// Minimizes the objective over measurements built from `blocks`. With only
/// one-dimensional blocks the admissible set is a single basis and no search
/// happens.
OptimizationOutcome minimize_objective(const SkewObjective& objective,
                                       const std::vector<InvariantBlock>& blocks,
                                       const OptimizerConfig& config,
                                       const CMatrix* auditReference = nullptr);

/// 1 - min objective over rho_BC-invariant measurements on the middle pair of
/// rho_AB (x) rho_CD.
MeasureResult maximize_minbs(const BilocalInput& input, const OptimizerConfig& config,
                             const Tolerances& tol = kDefaultTolerances);

/// Same search for the one-sided measure on subsystem A of rho_AB.
MeasureResult maximize_min_s(const DensityMatrix& rho, const OptimizerConfig& config,
                             const Tolerances& tol = kDefaultTolerances);

/// Records best / median / worst restart and the share of restarts within
/// 1e-4 of the best into `diagnostics`.
void record_dispersion(const OptimizationOutcome& outcome, MeasureResult& result);

}  // namespace minbs
