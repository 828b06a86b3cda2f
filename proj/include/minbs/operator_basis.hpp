#pragma once

#include <vector>

#include "minbs/qmatrix.hpp"
#include "minbs/states.hpp"

namespace minbs {

/// Orthonormal Hermitian basis of the d x d operators, tr(B_i B_j) = delta_ij,
/// with elements[0] = I / sqrt(d).
struct HermitianBasis {
  int dim = 0;
  std::vector<CMatrix> elements;
};

/// Coefficients t_ij = tr(sqrt(rho) (X_i (x) Y_j)). rowDim / colDim are the
/// local dimensions whose squares give the matrix shape.
struct CorrelationMatrix {
  RMatrix entries;
  int rowDim = 0;
  int colDim = 0;
};

namespace operator_basis {

/// Generalized Gell-Mann basis in the order: identity, symmetric (j<k),
/// antisymmetric (j<k), diagonal (l = 1..d-1). For d = 2 this is
/// {I, sigma_x, sigma_y, sigma_z} / sqrt(2).
HermitianBasis gell_mann_basis(int dim);

/// Gram matrix tr(B_i B_j); identity for an orthonormal basis.
RMatrix gram_matrix(const HermitianBasis& basis);

/// Real coefficients tr(H B_k) of a Hermitian operator in the basis. Imaginary
/// residue above tol.imagResidue throws NumericalFailure.
RVector expand(const CMatrix& hermitian, const HermitianBasis& basis,
               const Tolerances& tol = kDefaultTolerances);

/// Expansion of sqrt(rho) in basisA (x) basisB. Throws DimensionMismatch
/// unless rho is bipartite with matching local dimensions.
CorrelationMatrix correlation_matrix(const DensityMatrix& rho, const HermitianBasis& basisA,
                                     const HermitianBasis& basisB,
                                     const Tolerances& tol = kDefaultTolerances);
/// Same, from a precomputed square root on (dimA, dimB).
CorrelationMatrix correlation_matrix_of_root(const CMatrix& sqrtRho, const HermitianBasis& basisA,
                                             const HermitianBasis& basisB,
                                             const Tolerances& tol = kDefaultTolerances);

/// sum_ij t_ij X_i (x) Y_j.
CMatrix reconstruct(const CorrelationMatrix& t, const HermitianBasis& basisA,
                    const HermitianBasis& basisB);

/// T_bc,ad = transpose(T_ab) (x) T_cd, shape n^2 u^2 x m^2 v^2. Row (j, k) is
/// j * u^2 + k, column (i, l) is i * v^2 + l.
CorrelationMatrix bilocal_correlation_matrix(const CorrelationMatrix& tab,
                                             const CorrelationMatrix& tcd);

/// F matrix of a rank-1 projective measurement on H_B (x) H_C:
/// f_{g,(jk)} = tr(Pi_g (Y_j (x) Z_k)). Throws InvalidMeasurement if the
/// projectors are not rank-1, orthogonal and complete.
RMatrix measurement_expansion(const std::vector<CMatrix>& projectors, const HermitianBasis& basisB,
                              const HermitianBasis& basisC,
                              const Tolerances& tol = kDefaultTolerances);

/// Checks rank-1 / orthogonality / completeness of a projector family.
void check_projective_measurement(const std::vector<CMatrix>& projectors,
                                  const Tolerances& tol = kDefaultTolerances);

/// Rank-1 projectors onto the columns of a unitary.
std::vector<CMatrix> projectors_from_basis(const CMatrix& basis);

}  // namespace operator_basis
}  // namespace minbs
