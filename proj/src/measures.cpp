#include "minbs/measures.hpp"

#include <cmath>
#include <limits>

#include "minbs/error.hpp"

namespace minbs {

MarginalSpectrum marginal_spectrum(const DensityMatrix& rho, const Tolerances& tol) {
  const EigenSystem es = qmatrix::hermitian_eig(rho.matrix(), tol);
  MarginalSpectrum spec;
  spec.eigenvalues = es.values;
  spec.eigenvectors = es.vectors;
  spec.gapTolerance = gap_tolerance(es.values, tol.degeneracyGap);
  spec.minGap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 1; i < es.values.size(); ++i) {
    spec.minGap = std::min(spec.minGap, es.values(i) - es.values(i - 1));
  }
  spec.degenerate = spec.minGap < spec.gapTolerance;
  return spec;
}

namespace measures {

namespace {

using operator_basis::gell_mann_basis;

double smallest_gap(const RVector& ascending) {
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 1; i < ascending.size(); ++i) gap = std::min(gap, ascending(i) - ascending(i - 1));
  return gap;
}

int cluster_count(const RVector& ascending, double gapTolerance) {
  if (ascending.size() == 0) return 0;
  int clusters = 1;
  for (Eigen::Index i = 1; i < ascending.size(); ++i) {
    if (ascending(i) - ascending(i - 1) >= gapTolerance) ++clusters;
  }
  return clusters;
}

// Columns of `basis` are vectors on (first, second); returns them re-expressed
// on (second, first).
CMatrix swap_factors(const CMatrix& basis, int first, int second) {
  CMatrix out(basis.rows(), basis.cols());
  for (int a = 0; a < first; ++a) {
    for (int b = 0; b < second; ++b) out.row(b * first + a) = basis.row(a * second + b);
  }
  return out;
}

CMatrix qubit_basis(const Eigen::Vector3d& bloch) {
  CMatrix h(2, 2);
  h << Complex(bloch(2), 0.0), Complex(bloch(0), -bloch(1)), Complex(bloch(0), bloch(1)), Complex(-bloch(2), 0.0);
  return qmatrix::hermitian_eig(h).vectors;
}

// B (or C) coefficient matrix: row s holds tr(|s><s| Y_j).
RMatrix projector_rows(const CMatrix& basisVectors, const HermitianBasis& basis) {
  RMatrix rows(basisVectors.cols(), static_cast<Eigen::Index>(basis.elements.size()));
  for (Eigen::Index s = 0; s < basisVectors.cols(); ++s) {
    for (std::size_t j = 0; j < basis.elements.size(); ++j) {
      rows(s, static_cast<Eigen::Index>(j)) =
          basisVectors.col(s).dot(basis.elements[j] * basisVectors.col(s)).real();
    }
  }
  return rows;
}

struct Correlations {
  CorrelationMatrix tab;
  CorrelationMatrix tcd;
};

Correlations correlations(const BilocalInput& input, const Tolerances& tol) {
  return {operator_basis::correlation_matrix(input.rhoAB, gell_mann_basis(input.m()), gell_mann_basis(input.n()), tol),
          operator_basis::correlation_matrix(input.rhoCD, gell_mann_basis(input.u()), gell_mann_basis(input.v()), tol)};
}

CMatrix rho_bc(const BilocalInput& input) {
  return qmatrix::kron(input.rhoAB.marginal({1}).matrix(), input.rhoCD.marginal({0}).matrix());
}

double sum_smallest_eigenvalues(const RMatrix& symmetric, int count) {
  Eigen::SelfAdjointEigenSolver<RMatrix> solver(symmetric, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::NumericalFailure, "eigensolver failed");
  count = std::min<int>(count, static_cast<int>(solver.eigenvalues().size()));
  return solver.eigenvalues().head(count).sum();
}

// Runs the optimizer with eigenvalues clustered at the loose near-degeneracy
// gap; used to flag closed forms evaluated on almost-degenerate spectra.
double near_degenerate_value(const BilocalInput& input, const MeasureOptions& options) {
  const CMatrix root = qmatrix::kron(input.rhoAB.sqrt(options.tol), input.rhoCD.sqrt(options.tol));
  const CMatrix ref = rho_bc(input);
  const EigenSystem es = qmatrix::hermitian_eig(ref, options.tol);
  const auto blocks = invariant_blocks(ref, gap_tolerance(es.values, options.tol.nearDegeneracyGap), options.tol);
  const SkewObjective objective(root, input.m(), input.n() * input.u(), input.v());
  return 1.0 - minimize_objective(objective, blocks, options.optimizer).bestObjective;
}

}  // namespace

double skew_information(const CMatrix& rho, const CMatrix& observable, const Tolerances& tol) {
  if (rho.rows() != observable.rows() || rho.cols() != observable.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "state and observable dimensions differ");
  }
  const CMatrix root = qmatrix::psd_sqrt(rho, tol);
  const double first = qmatrix::trace_product(rho, observable * observable).real();
  const double second = qmatrix::trace_product(root * observable, root * observable).real();
  return std::max(0.0, first - second);
}

double skew_information(const DensityMatrix& rho, const CMatrix& observable, const Tolerances& tol) {
  return skew_information(rho.matrix(), observable, tol);
}

double trace_sum(const CMatrix& sqrtRho, int left, int middle, int right, const std::vector<CMatrix>& projectors) {
  if (sqrtRho.rows() != left * middle * right) {
    throw Error(ErrorKind::DimensionMismatch, "square root does not match (left, middle, right)");
  }
  double total = 0.0;
  for (const auto& pi : projectors) {
    const CMatrix p = qmatrix::kron(qmatrix::kron(qmatrix::identity(left), pi), qmatrix::identity(right));
    const CMatrix sp = sqrtRho * p;
    total += qmatrix::trace_product(sp, sp).real();
  }
  return total;
}

double skew_sum(const CMatrix& rho, int left, int middle, int right, const std::vector<CMatrix>& projectors,
                const Tolerances& tol) {
  if (rho.rows() != left * middle * right) {
    throw Error(ErrorKind::DimensionMismatch, "state does not match (left, middle, right)");
  }
  double total = 0.0;
  for (const auto& pi : projectors) {
    const CMatrix p = qmatrix::kron(qmatrix::kron(qmatrix::identity(left), pi), qmatrix::identity(right));
    total += skew_information(rho, p, tol);
  }
  return total;
}

MeasureResult min_s(const DensityMatrix& rho, const MeasureOptions& options) {
  if (rho.dims().size() != 2) throw Error(ErrorKind::DimensionMismatch, "expected a bipartite state");
  const MarginalSpectrum spec = marginal_spectrum(rho.marginal({0}), options.tol);
  if (spec.degenerate) {
    MeasureResult result = maximize_min_s(rho, options.optimizer, options.tol);
    result.diagnostics["rho_a_min_gap"] = spec.minGap;
    return result;
  }
  MeasureResult result;
  result.method = Method::NondegenerateClosedForm;
  const SkewObjective objective(rho.sqrt(options.tol), 1, rho.dims()[0], rho.dims()[1]);
  result.value = clamp_unit(1.0 - objective.evaluate(spec.eigenvectors), result, options.tol.clampWarning);
  const CMatrix rhoA = rho.marginal({0}).matrix();
  result.optimalMeasurement = measurement_from_basis(
      invariant_blocks(rhoA, spec.gapTolerance, options.tol), spec.eigenvectors, options.tol);
  result.diagnostics["rho_a_min_gap"] = spec.minGap;
  return result;
}

double minbs_pure(const std::vector<double>& lambda, const std::vector<double>& mu, const Tolerances& tol) {
  auto moments = [&](const std::vector<double>& c) {
    double two = 0.0, four = 0.0;
    for (double x : c) {
      if (!(x >= 0.0)) throw Error(ErrorKind::NotNormalized, "Schmidt coefficients must be nonnegative");
      two += x * x;
      four += x * x * x * x;
    }
    if (c.empty() || std::abs(two - 1.0) > tol.normalization) {
      throw Error(ErrorKind::NotNormalized, "Schmidt coefficients must satisfy sum c^2 = 1");
    }
    return four;
  };
  return 1.0 - moments(lambda) * moments(mu);
}

double upper_bound_t2(const CorrelationMatrix& tbcad, int n, int u) {
  if (tbcad.entries.rows() != static_cast<Eigen::Index>(n) * n * u * u) {
    throw Error(ErrorKind::DimensionMismatch, "T_bc,ad must have n^2 u^2 rows");
  }
  const RMatrix gram = tbcad.entries * tbcad.entries.transpose();
  return 1.0 - sum_smallest_eigenvalues(gram, n * u);
}

double upper_bound_t2(const BilocalInput& input, const Tolerances& tol) {
  const Correlations c = correlations(input, tol);
  return upper_bound_t2(operator_basis::bilocal_correlation_matrix(c.tab, c.tcd), input.n(), input.u());
}

double measured_weight_second(const CorrelationMatrix& tab, const CMatrix& basisVectors,
                              const HermitianBasis& basisSecond) {
  return (projector_rows(basisVectors, basisSecond) * tab.entries.transpose()).squaredNorm();
}

double measured_weight_first(const CorrelationMatrix& tcd, const CMatrix& basisVectors,
                             const HermitianBasis& basisFirst) {
  return (projector_rows(basisVectors, basisFirst) * tcd.entries).squaredNorm();
}

double qubit_measured_minimum(const RMatrix& t, Eigen::Vector3d* direction) {
  if (t.rows() != 4) throw Error(ErrorKind::DimensionMismatch, "qubit correlation block needs 4 rows");
  const RMatrix r = t.bottomRows(3);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(Eigen::Matrix3d(r * r.transpose()));
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::NumericalFailure, "eigensolver failed");
  if (direction != nullptr) *direction = solver.eigenvectors().col(0);
  return t.row(0).squaredNorm() + solver.eigenvalues()(0);
}

MeasureResult minbs_b_nondegenerate(const BilocalInput& input, const MeasureOptions& options) {
  const Tolerances& tol = options.tol;
  const MarginalSpectrum specB = marginal_spectrum(input.rhoAB.marginal({1}), tol);
  if (specB.degenerate) throw Error(ErrorKind::DegenerateMarginal, "rho_B is degenerate");
  const MarginalSpectrum specC = marginal_spectrum(input.rhoCD.marginal({0}), tol);
  const Correlations c = correlations(input, tol);
  const HermitianBasis basisB = gell_mann_basis(input.n());
  const HermitianBasis basisC = gell_mann_basis(input.u());
  const int u = input.u();

  MeasureResult result;
  const double weightB = measured_weight_second(c.tab, specB.eigenvectors, basisB);
  const double t3 = 1.0 - weightB * sum_smallest_eigenvalues(c.tcd.entries * c.tcd.entries.transpose(), u);
  result.bounds.t3Upper = t3;
  result.diagnostics["b_weight"] = weightB;

  CMatrix basisCVectors;
  double weightC = 0.0;
  if (!specC.degenerate) {
    result.method = Method::NondegenerateClosedForm;
    basisCVectors = specC.eigenvectors;
    weightC = measured_weight_first(c.tcd, basisCVectors, basisC);
  } else if (u == 2) {
    result.method = Method::QubitClosedForm;
    Eigen::Vector3d bloch;
    weightC = qubit_measured_minimum(c.tcd.entries, &bloch);
    basisCVectors = qubit_basis(bloch);
    result.diagnostics["r_cd_norm2"] = c.tcd.entries.row(0).squaredNorm();
  } else if (options.allowOptimizer) {
    result.method = Method::Optimizer;
    const CMatrix rhoC = input.rhoCD.marginal({0}).matrix();
    const SkewObjective objective(input.rhoCD.sqrt(tol), 1, u, input.v());
    const auto outcome = minimize_objective(objective, invariant_blocks(rhoC, specC.gapTolerance, tol), options.optimizer);
    weightC = outcome.bestObjective;
    basisCVectors = outcome.measurement.basis();
    record_dispersion(outcome, result);
  } else {
    result.method = Method::BoundOnly;
    result.value = clamp_unit(t3, result, tol.clampWarning);
    return result;
  }
  result.diagnostics["c_weight"] = weightC;
  result.value = clamp_unit(1.0 - weightB * weightC, result, tol.clampWarning);

  const CMatrix ref = rho_bc(input);
  const EigenSystem es = qmatrix::hermitian_eig(ref, tol);
  result.optimalMeasurement = measurement_from_basis(invariant_blocks(ref, gap_tolerance(es.values, tol.degeneracyGap), tol),
                                                     qmatrix::kron(specB.eigenvectors, basisCVectors), tol);
  return result;
}

MeasureResult minbs_both_nondegenerate(const BilocalInput& input, const MeasureOptions& options) {
  const Tolerances& tol = options.tol;
  const MarginalSpectrum specB = marginal_spectrum(input.rhoAB.marginal({1}), tol);
  const MarginalSpectrum specC = marginal_spectrum(input.rhoCD.marginal({0}), tol);
  if (specB.degenerate || specC.degenerate) {
    throw Error(ErrorKind::DegenerateMarginal, specB.degenerate ? "rho_B is degenerate" : "rho_C is degenerate");
  }
  const Correlations c = correlations(input, tol);
  MeasureResult result;
  result.method = Method::NondegenerateClosedForm;
  const double weightB = measured_weight_second(c.tab, specB.eigenvectors, gell_mann_basis(input.n()));
  const double weightC = measured_weight_first(c.tcd, specC.eigenvectors, gell_mann_basis(input.u()));
  result.diagnostics["b_weight"] = weightB;
  result.diagnostics["c_weight"] = weightC;
  result.value = clamp_unit(1.0 - weightB * weightC, result, tol.clampWarning);

  const CMatrix ref = rho_bc(input);
  const EigenSystem es = qmatrix::hermitian_eig(ref, tol);
  result.optimalMeasurement = measurement_from_basis(invariant_blocks(ref, gap_tolerance(es.values, tol.degeneracyGap), tol),
                                                     qmatrix::kron(specB.eigenvectors, specC.eigenvectors), tol);
  return result;
}

MeasureResult minbs(const BilocalInput& input, const MeasureOptions& options) {
  const Tolerances& tol = options.tol;
  const MarginalSpectrum specB = marginal_spectrum(input.rhoAB.marginal({1}), tol);
  const MarginalSpectrum specC = marginal_spectrum(input.rhoCD.marginal({0}), tol);
  const CMatrix ref = rho_bc(input);
  const EigenSystem esBC = qmatrix::hermitian_eig(ref, tol);
  const double gapBC = gap_tolerance(esBC.values, tol.degeneracyGap);
  const auto blocksBC = invariant_blocks(ref, gapBC, tol);
  // Products lambda_s mu_t can coincide across different (s, t) even when both
  // factors are nondegenerate; the admissible set then contains entangled bases.
  const bool crossDegenerate = static_cast<int>(blocksBC.size()) !=
                               cluster_count(specB.eigenvalues, specB.gapTolerance) *
                                   cluster_count(specC.eigenvalues, specC.gapTolerance);
  const bool pureAB = input.rhoAB.max_eigenvalue() >= 1.0 - tol.pureThreshold;
  const bool pureCD = input.rhoCD.max_eigenvalue() >= 1.0 - tol.pureThreshold;

  MeasureResult result;
  if (pureAB && pureCD) {
    auto schmidt_of = [&](const DensityMatrix& rho) {
      const EigenSystem es = qmatrix::hermitian_eig(rho.matrix(), tol);
      const CVector psi = es.vectors.col(es.values.size() - 1);
      const SchmidtDecomposition sd = qmatrix::schmidt(psi, rho.dims()[0], rho.dims()[1], tol);
      return std::vector<double>(sd.coefficients.data(), sd.coefficients.data() + sd.coefficients.size());
    };
    const auto lambda = schmidt_of(input.rhoAB);
    const auto mu = schmidt_of(input.rhoCD);
    result.method = Method::PureClosedForm;
    result.value = clamp_unit(minbs_pure(lambda, mu, tol), result, tol.clampWarning);
    result.optimalMeasurement = eigenbasis_measurement(blocksBC);
  } else if (!crossDegenerate && !specB.degenerate && !specC.degenerate) {
    result = minbs_both_nondegenerate(input, options);
  } else if (!crossDegenerate && !specB.degenerate && specC.degenerate && input.u() == 2) {
    result = minbs_b_nondegenerate(input, options);
  } else if (!crossDegenerate && specB.degenerate && !specC.degenerate && input.n() == 2) {
    result = minbs_b_nondegenerate(input.mirrored(), options);
    // Mirrored measurement acts on (C, B); bring it back to (B, C).
    const CMatrix basis = swap_factors(result.optimalMeasurement->basis(), input.u(), input.n());
    result.optimalMeasurement = measurement_from_basis(blocksBC, basis, tol);
    result.diagnostics["mirrored"] = 1.0;
  } else if (options.allowOptimizer) {
    result = maximize_minbs(input, options.optimizer, tol);
  } else {
    result.method = Method::BoundOnly;
  }

  const double t2 = upper_bound_t2(input, tol);
  result.bounds.t2Upper = t2;
  if (result.method == Method::BoundOnly) {
    const double bound = result.bounds.t3Upper ? std::min(t2, *result.bounds.t3Upper) : t2;
    result.value = clamp_unit(bound, result, tol.clampWarning);
  }
  result.diagnostics["rho_b_min_gap"] = specB.minGap;
  result.diagnostics["rho_c_min_gap"] = specC.minGap;
  result.diagnostics["rho_bc_min_gap"] = smallest_gap(esBC.values);
  result.diagnostics["rho_bc_blocks"] = static_cast<double>(blocksBC.size());
  if (crossDegenerate) result.diagnostics["cross_degenerate"] = 1.0;

  const bool closedForm = result.method == Method::NondegenerateClosedForm || result.method == Method::QubitClosedForm;
  if (closedForm && options.crossCheckNearDegenerate && options.allowOptimizer) {
    const bool near = specB.minGap < gap_tolerance(specB.eigenvalues, tol.nearDegeneracyGap) ||
                      specC.minGap < gap_tolerance(specC.eigenvalues, tol.nearDegeneracyGap) ||
                      smallest_gap(esBC.values) < gap_tolerance(esBC.values, tol.nearDegeneracyGap);
    if (near) {
      result.diagnostics["closed_form_value"] = result.value;
      result.diagnostics["near_degenerate_optimizer_value"] = near_degenerate_value(input, options);
    }
  }
  return result;
}

std::array<double, 4> bell_diagonal_h(const std::array<double, 4>& weights) {
  const double a = std::sqrt(weights[0]);
  const double b = std::sqrt(weights[1]);
  const double c = std::sqrt(weights[2]);
  const double d = std::sqrt(weights[3]);
  return {a + b + c + d, a - b + c - d, -a + b + c - d, a + b - c - d};
}

double bell_diagonal_minbs(const std::array<double, 4>& weights, const Tolerances& tol) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorKind::InvalidWeights, "Bell-diagonal weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > tol.weights) throw Error(ErrorKind::InvalidWeights, "weights must sum to 1");
  const auto h = bell_diagonal_h(weights);
  double fourth = 0.0;
  for (double x : h) fourth += x * x * x * x;
  return 1.0 - fourth / 16.0;
}

PropertyViCheck property_vi_check(const DensityMatrix& rhoAB, const MeasureOptions& options) {
  PropertyViCheck check;
  check.lhs = minbs(BilocalInput(rhoAB.swapped(), rhoAB), options).value;
  check.rhs = min_s(rhoAB, options).value;
  check.holds = check.lhs >= check.rhs - 1e-7;
  return check;
}

}  // namespace measures
}  // namespace minbs
