#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "minbs/qmatrix.hpp"

namespace minbs {

/// Outcome of checking the density-matrix invariants on an arbitrary matrix.
struct ValidationReport {
  double hermiticityDeviation = 0.0;
  double minEigenvalue = 0.0;
  double traceDeviation = 0.0;
  bool dimsMatch = true;
  bool hermitian = true;
  bool positive = true;
  bool unitTrace = true;
  bool finite = true;

  [[nodiscard]] bool ok() const { return dimsMatch && hermitian && positive && unitTrace && finite; }
  [[nodiscard]] std::vector<std::string> failures() const;
};

ValidationReport validate(const CMatrix& m, const std::vector<int>& dims,
                          const Tolerances& tol = kDefaultTolerances);

/// Hermitian, positive semidefinite, unit-trace matrix with subsystem layout.
/// Construction validates; an instance is always a legal state.
class DensityMatrix {
 public:
  DensityMatrix(CMatrix matrix, std::vector<int> dims, std::string label = {},
                const Tolerances& tol = kDefaultTolerances);

  [[nodiscard]] const CMatrix& matrix() const { return matrix_; }
  [[nodiscard]] const std::vector<int>& dims() const { return dims_; }
  [[nodiscard]] int dim() const { return static_cast<int>(matrix_.rows()); }
  [[nodiscard]] const std::string& label() const { return label_; }

  /// Reduced state on the listed subsystems.
  [[nodiscard]] DensityMatrix marginal(std::vector<int> keep) const;
  /// State with tensor factors reordered (output factor k = input factor perm[k]).
  [[nodiscard]] DensityMatrix permuted(const std::vector<int>& perm) const;
  /// Two-party swap rho_AB -> rho_BA.
  [[nodiscard]] DensityMatrix swapped() const;
  /// (U_0 (x) U_1 (x) ...) rho (...)^dagger with one unitary per subsystem.
  [[nodiscard]] DensityMatrix conjugated(const std::vector<CMatrix>& localUnitaries) const;

  [[nodiscard]] CMatrix sqrt(const Tolerances& tol = kDefaultTolerances) const;
  [[nodiscard]] double max_eigenvalue() const;

 private:
  CMatrix matrix_;
  std::vector<int> dims_;
  std::string label_;
};

DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b);

/// The two independent sources of the bilocal layout: rho_AB on (m, n) and
/// rho_CD on (u, v).
struct BilocalInput {
  DensityMatrix rhoAB;
  DensityMatrix rhoCD;

  BilocalInput(DensityMatrix ab, DensityMatrix cd);

  [[nodiscard]] int m() const { return rhoAB.dims()[0]; }
  [[nodiscard]] int n() const { return rhoAB.dims()[1]; }
  [[nodiscard]] int u() const { return rhoCD.dims()[0]; }
  [[nodiscard]] int v() const { return rhoCD.dims()[1]; }

  /// Mirror image rho_DC (x) rho_BA; exchanges the roles of B and C.
  [[nodiscard]] BilocalInput mirrored() const;
};

namespace states {

enum class BellKind { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

/// Phi+- = (|00> +- |11>)/sqrt2, Psi+- = (|01> +- |10>)/sqrt2.
CVector bell_vector(BellKind kind);
DensityMatrix bell(BellKind kind);

/// sum_k weights[k] * |B_k><B_k| with B = (Phi+, Phi-, Psi+, Psi-).
/// Throws InvalidWeights unless weights are nonnegative and sum to 1.
DensityMatrix bell_diagonal(const std::array<double, 4>& weights,
                            const Tolerances& tol = kDefaultTolerances);

/// v |Psi-><Psi-| + (1 - v) I/4, v in [-1/3, 1]; throws OutOfRange otherwise.
DensityMatrix werner(double v);

/// Bell-diagonal weights equivalent to werner(v).
std::array<double, 4> werner_weights(double v);

/// (|00><00| + |11><11|)/2.
DensityMatrix classical_separable();

struct ClassicalComponent {
  DensityMatrix state;
  double weight;
  int basisIndex;
};

/// sum_k p_k rho_k (x) |k><k| on (dim rho_k, classicalDim).
DensityMatrix quantum_classical(const std::vector<ClassicalComponent>& components, int classicalDim,
                                const Tolerances& tol = kDefaultTolerances);
/// sum_k p_k |k><k| (x) rho_k on (classicalDim, dim rho_k).
DensityMatrix classical_quantum(const std::vector<ClassicalComponent>& components, int classicalDim,
                                const Tolerances& tol = kDefaultTolerances);

/// G G^dagger / tr(G G^dagger) with G a (prod dims) x rank matrix of standard
/// complex Gaussians drawn from `gen`.
DensityMatrix random_density(const std::vector<int>& dims, int rank, std::mt19937_64& gen);
DensityMatrix random_density(const std::vector<int>& dims, int rank, std::uint64_t seed);

/// Haar-distributed unitary (QR of a complex Ginibre matrix, phases fixed by
/// the diagonal of R).
CMatrix haar_unitary(int dim, std::mt19937_64& gen);

/// sum_i c_i |ii> on (len, len).
CVector pure_vector_from_schmidt(const std::vector<double>& coefficients,
                                 const Tolerances& tol = kDefaultTolerances);
DensityMatrix pure_from_schmidt(const std::vector<double>& coefficients,
                                const Tolerances& tol = kDefaultTolerances);

DensityMatrix pure(const CVector& psi, std::vector<int> dims,
                   const Tolerances& tol = kDefaultTolerances);

DensityMatrix maximally_mixed(int dim);

}  // namespace states
}  // namespace minbs
