#pragma once

#include <array>
#include <vector>

#include "minbs/measure_result.hpp"
#include "minbs/operator_basis.hpp"
#include "minbs/optimizer.hpp"
#include "minbs/states.hpp"

namespace minbs {

struct MeasureOptions {
  OptimizerConfig optimizer;
  Tolerances tol;
  /// When no closed form applies and this is false, the value reported is the
  /// tightest available upper bound (method BoundOnly).
  bool allowOptimizer = true;
  /// Run the optimizer alongside closed forms on near-degenerate spectra.
  bool crossCheckNearDegenerate = true;
};

/// Spectrum of a one-party marginal with its degeneracy verdict.
struct MarginalSpectrum {
  RVector eigenvalues;  // ascending
  CMatrix eigenvectors;
  bool degenerate = false;
  double gapTolerance = 0.0;
  double minGap = 0.0;  // smallest adjacent gap (infinity for dimension 1)
};

MarginalSpectrum marginal_spectrum(const DensityMatrix& rho, const Tolerances& tol = kDefaultTolerances);

namespace measures {

/// Wigner-Yanase skew information tr(rho K^2) - tr(sqrt(rho) K sqrt(rho) K).
double skew_information(const DensityMatrix& rho, const CMatrix& observable,
                        const Tolerances& tol = kDefaultTolerances);
double skew_information(const CMatrix& rho, const CMatrix& observable,
                        const Tolerances& tol = kDefaultTolerances);

/// Explicit-matrix evaluation of sum_g tr(S P_g S P_g) with
/// P_g = I_left (x) Pi_g (x) I_right. Independent of SkewObjective.
double trace_sum(const CMatrix& sqrtRho, int left, int middle, int right,
                 const std::vector<CMatrix>& projectors);

/// sum_g I(rho, I_left (x) Pi_g (x) I_right) from explicit skew informations.
double skew_sum(const CMatrix& rho, int left, int middle, int right, const std::vector<CMatrix>& projectors,
                const Tolerances& tol = kDefaultTolerances);

/// One-sided skew-information measure over rho_A-invariant measurements.
MeasureResult min_s(const DensityMatrix& rho, const MeasureOptions& options = {});

/// Bilocal measure with dispatch: both sources pure -> Schmidt closed form;
/// both middle marginals nondegenerate -> eigenbasis closed form; one
/// nondegenerate and the other a qubit -> qubit closed form; otherwise the
/// optimizer over rho_B (x) rho_C invariant measurements. Closed forms are only
/// used when rho_B (x) rho_C has no accidental degeneracy across factors.
MeasureResult minbs(const BilocalInput& input, const MeasureOptions& options = {});

/// 1 - (sum_i lambda_i^4)(sum_j mu_j^4) for Schmidt coefficient lists.
double minbs_pure(const std::vector<double>& lambda, const std::vector<double>& mu,
                  const Tolerances& tol = kDefaultTolerances);

/// 1 - sum of the n*u smallest eigenvalues of T T^t.
double upper_bound_t2(const CorrelationMatrix& tbcad, int n, int u);
/// Same bound computed from the input states with Gell-Mann bases.
double upper_bound_t2(const BilocalInput& input, const Tolerances& tol = kDefaultTolerances);

/// ||B T_ab^t||_F^2 with B rows taken from the projectors onto `basisVectors`
/// (columns) in the operator basis of the second party.
double measured_weight_second(const CorrelationMatrix& tab, const CMatrix& basisVectors,
                              const HermitianBasis& basisSecond);
/// ||C T_cd||_F^2 for a measurement on the first party.
double measured_weight_first(const CorrelationMatrix& tcd, const CMatrix& basisVectors,
                             const HermitianBasis& basisFirst);

/// Minimum of ||C T||_F^2 over all qubit measurements on the first party of a
/// state whose correlation matrix is `t` (rows: qubit Pauli basis):
/// ||r||^2 + lambda_min(R R^t). `direction` receives the minimizing Bloch vector.
double qubit_measured_minimum(const RMatrix& t, Eigen::Vector3d* direction = nullptr);

/// Requires nondegenerate rho_B; throws DegenerateMarginal otherwise.
MeasureResult minbs_b_nondegenerate(const BilocalInput& input, const MeasureOptions& options = {});

/// Requires nondegenerate rho_B and rho_C; throws DegenerateMarginal otherwise.
MeasureResult minbs_both_nondegenerate(const BilocalInput& input, const MeasureOptions& options = {});

/// h_0..h_3 of a Bell-diagonal state with weights on (Phi+, Phi-, Psi+, Psi-).
std::array<double, 4> bell_diagonal_h(const std::array<double, 4>& weights);

/// 1 - (h_0^4 + h_1^4 + h_2^4 + h_3^4)/16: the value reached on rho_BA (x) rho_AB
/// by the Bell-basis measurement on the middle pair.
double bell_diagonal_minbs(const std::array<double, 4>& weights, const Tolerances& tol = kDefaultTolerances);

struct PropertyViCheck {
  double lhs = 0.0;  // minbs(rho_BA (x) rho_AB)
  double rhs = 0.0;  // min_s(rho_AB)
  bool holds = false;
};

PropertyViCheck property_vi_check(const DensityMatrix& rhoAB, const MeasureOptions& options = {});

}  // namespace measures
}  // namespace minbs
