#pragma once

// Dense complex linear algebra used by every other module. Matrices are small
// (at most a few hundred rows), so everything is dense and allocation-happy.

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "minbs/tolerances.hpp"

namespace minbs {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Spectral decomposition of a Hermitian matrix: `vectors * diag(values) *
/// vectors^dagger`, eigenvalues ascending.
struct EigenSystem {
  RVector values;
  CMatrix vectors;
};

/// Schmidt form `psi = sum_k coefficients[k] * left.col(k) (x) right.col(k)`,
/// coefficients nonincreasing, length min(dimLeft, dimRight).
struct SchmidtDecomposition {
  RVector coefficients;
  CMatrix leftBasis;
  CMatrix rightBasis;
};

namespace qmatrix {

/// Largest absolute entry of H - H^dagger.
double hermiticity_deviation(const CMatrix& h);

/// Throws NotHermitian when `h` is not square or fails the symmetry check,
/// NumericalFailure when the eigensolver does not converge.
EigenSystem hermitian_eig(const CMatrix& h, const Tolerances& tol = kDefaultTolerances);

/// Applies a real function to the spectrum of a Hermitian matrix.
template <typename Fn>
CMatrix spectral_apply(const EigenSystem& es, Fn&& fn) {
  RVector mapped = es.values.unaryExpr(std::forward<Fn>(fn));
  return es.vectors * mapped.asDiagonal() * es.vectors.adjoint();
}

/// Principal square root of a PSD matrix. Eigenvalues in [-psdClamp, 0) are
/// treated as zero; anything lower throws NotPSD.
CMatrix psd_sqrt(const CMatrix& rho, const Tolerances& tol = kDefaultTolerances);

CMatrix kron(const CMatrix& a, const CMatrix& b);
RMatrix kron(const RMatrix& a, const RMatrix& b);

CMatrix identity(int dim);

/// Reduced matrix on the subsystems listed in `keep` (kept in ascending
/// order). `dims` lists every subsystem dimension of `m`.
CMatrix partial_trace(const CMatrix& m, std::span<const int> dims, std::span<const int> keep);

/// Reorders tensor factors: output factor k is input factor `perm[k]`.
CMatrix permute_subsystems(const CMatrix& m, std::span<const int> dims, std::span<const int> perm);

/// Throws NotNormalized if ||psi|| deviates from 1, DimensionMismatch if the
/// length is not dimLeft * dimRight.
SchmidtDecomposition schmidt(const CVector& psi, int dimLeft, int dimRight,
                             const Tolerances& tol = kDefaultTolerances);

/// tr(A^dagger B).
Complex hs_inner(const CMatrix& a, const CMatrix& b);

/// tr(A B) without forming the product.
Complex trace_product(const CMatrix& a, const CMatrix& b);

int dimension_product(std::span<const int> dims);

}  // namespace qmatrix
}  // namespace minbs
