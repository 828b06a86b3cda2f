#include "minbs/states.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "minbs/error.hpp"

namespace minbs {

std::vector<std::string> ValidationReport::failures() const {
  std::vector<std::string> out;
  auto num = [](double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
  };
  if (!finite) out.emplace_back("non-finite entries");
  if (!dimsMatch) out.emplace_back("subsystem dimensions do not match matrix size");
  if (!hermitian) out.emplace_back("not Hermitian (deviation " + num(hermiticityDeviation) + ")");
  if (!positive) out.emplace_back("negative eigenvalue " + num(minEigenvalue));
  if (!unitTrace) out.emplace_back("trace deviates from 1 by " + num(traceDeviation));
  return out;
}

ValidationReport validate(const CMatrix& m, const std::vector<int>& dims, const Tolerances& tol) {
  ValidationReport report;
  report.finite = m.allFinite();
  const bool square = m.rows() == m.cols() && m.rows() > 0;
  report.dimsMatch = square && !dims.empty() &&
                     std::all_of(dims.begin(), dims.end(), [](int d) { return d >= 1; }) &&
                     qmatrix::dimension_product(dims) == m.rows();
  if (!report.finite || !square) {
    report.hermitian = report.positive = report.unitTrace = false;
    return report;
  }
  report.hermiticityDeviation = qmatrix::hermiticity_deviation(m);
  report.hermitian = report.hermiticityDeviation <= tol.hermiticity;
  const CMatrix sym = (m + m.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym, Eigen::EigenvaluesOnly);
  report.minEigenvalue = solver.eigenvalues().minCoeff();
  report.positive = report.minEigenvalue >= -tol.psdClamp;
  report.traceDeviation = std::abs(m.trace() - Complex(1.0, 0.0));
  report.unitTrace = report.traceDeviation <= tol.trace;
  return report;
}

DensityMatrix::DensityMatrix(CMatrix matrix, std::vector<int> dims, std::string label,
                             const Tolerances& tol)
    : dims_(std::move(dims)), label_(std::move(label)) {
  const ValidationReport report = validate(matrix, dims_, tol);
  if (!report.ok()) {
    std::string msg;
    for (const auto& f : report.failures()) msg += (msg.empty() ? "" : "; ") + f;
    ErrorKind kind = ErrorKind::InvalidInput;
    if (!report.dimsMatch) kind = ErrorKind::DimensionMismatch;
    else if (!report.hermitian) kind = ErrorKind::NotHermitian;
    else if (!report.positive) kind = ErrorKind::NotPSD;
    throw Error(kind, "invalid density matrix: " + msg);
  }
  matrix_ = (matrix + matrix.adjoint()) / 2.0;
}

DensityMatrix DensityMatrix::marginal(std::vector<int> keep) const {
  std::sort(keep.begin(), keep.end());
  std::vector<int> keptDims;
  for (int k : keep) {
    if (k < 0 || k >= static_cast<int>(dims_.size())) {
      throw Error(ErrorKind::DimensionMismatch, "marginal index out of range");
    }
    keptDims.push_back(dims_[k]);
  }
  return DensityMatrix(qmatrix::partial_trace(matrix_, dims_, keep), keptDims);
}

DensityMatrix DensityMatrix::permuted(const std::vector<int>& perm) const {
  std::vector<int> newDims(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    if (perm[k] < 0 || perm[k] >= static_cast<int>(dims_.size())) {
      throw Error(ErrorKind::DimensionMismatch, "permutation index out of range");
    }
    newDims[k] = dims_[perm[k]];
  }
  return DensityMatrix(qmatrix::permute_subsystems(matrix_, dims_, perm), newDims, label_);
}

DensityMatrix DensityMatrix::swapped() const {
  if (dims_.size() != 2) throw Error(ErrorKind::DimensionMismatch, "swap needs two subsystems");
  return permuted({1, 0});
}

DensityMatrix DensityMatrix::conjugated(const std::vector<CMatrix>& localUnitaries) const {
  if (localUnitaries.size() != dims_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one unitary per subsystem required");
  }
  CMatrix u = CMatrix::Identity(1, 1);
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (localUnitaries[k].rows() != dims_[k] || localUnitaries[k].cols() != dims_[k]) {
      throw Error(ErrorKind::DimensionMismatch, "local unitary has wrong size");
    }
    u = qmatrix::kron(u, localUnitaries[k]);
  }
  return DensityMatrix(u * matrix_ * u.adjoint(), dims_, label_);
}

CMatrix DensityMatrix::sqrt(const Tolerances& tol) const { return qmatrix::psd_sqrt(matrix_, tol); }

double DensityMatrix::max_eigenvalue() const {
  return qmatrix::hermitian_eig(matrix_).values.maxCoeff();
}

DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  std::vector<int> dims = a.dims();
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  return DensityMatrix(qmatrix::kron(a.matrix(), b.matrix()), dims);
}

BilocalInput::BilocalInput(DensityMatrix ab, DensityMatrix cd) : rhoAB(std::move(ab)), rhoCD(std::move(cd)) {
  if (rhoAB.dims().size() != 2 || rhoCD.dims().size() != 2) {
    throw Error(ErrorKind::DimensionMismatch, "each source must be a bipartite state");
  }
}

BilocalInput BilocalInput::mirrored() const { return {rhoCD.swapped(), rhoAB.swapped()}; }

namespace states {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
}

CVector bell_vector(BellKind kind) {
  CVector v = CVector::Zero(4);
  switch (kind) {
    case BellKind::PhiPlus: v(0) = kInvSqrt2; v(3) = kInvSqrt2; break;
    case BellKind::PhiMinus: v(0) = kInvSqrt2; v(3) = -kInvSqrt2; break;
    case BellKind::PsiPlus: v(1) = kInvSqrt2; v(2) = kInvSqrt2; break;
    case BellKind::PsiMinus: v(1) = kInvSqrt2; v(2) = -kInvSqrt2; break;
  }
  return v;
}

DensityMatrix bell(BellKind kind) {
  const CVector v = bell_vector(kind);
  return DensityMatrix(v * v.adjoint(), {2, 2});
}

DensityMatrix bell_diagonal(const std::array<double, 4>& weights, const Tolerances& tol) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorKind::InvalidWeights, "Bell-diagonal weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > tol.weights) {
    throw Error(ErrorKind::InvalidWeights, "Bell-diagonal weights must sum to 1");
  }
  constexpr std::array kinds{BellKind::PhiPlus, BellKind::PhiMinus, BellKind::PsiPlus, BellKind::PsiMinus};
  CMatrix rho = CMatrix::Zero(4, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const CVector v = bell_vector(kinds[k]);
    rho += weights[k] * (v * v.adjoint());
  }
  return DensityMatrix(rho, {2, 2});
}

std::array<double, 4> werner_weights(double v) {
  const double rest = (1.0 - v) / 4.0;
  return {rest, rest, rest, (1.0 + 3.0 * v) / 4.0};
}

DensityMatrix werner(double v) {
  if (!(v >= -1.0 / 3.0 - 1e-15 && v <= 1.0 + 1e-15)) {
    std::ostringstream os;
    os << "Werner parameter " << v << " outside [-1/3, 1]";
    throw Error(ErrorKind::OutOfRange, os.str());
  }
  const CVector s = bell_vector(BellKind::PsiMinus);
  CMatrix rho = v * (s * s.adjoint()) + ((1.0 - v) / 4.0) * CMatrix::Identity(4, 4);
  return DensityMatrix(rho, {2, 2}, "werner");
}

DensityMatrix classical_separable() {
  CMatrix rho = CMatrix::Zero(4, 4);
  rho(0, 0) = 0.5;
  rho(3, 3) = 0.5;
  return DensityMatrix(rho, {2, 2}, "classical_separable");
}

namespace {

CMatrix classical_mixture(const std::vector<ClassicalComponent>& components, int classicalDim,
                          bool classicalFirst, int& quantumDim, const Tolerances& tol) {
  if (components.empty()) throw Error(ErrorKind::InvalidWeights, "no components");
  quantumDim = components.front().state.dim();
  double sum = 0.0;
  for (const auto& c : components) {
    if (!(c.weight >= 0.0)) throw Error(ErrorKind::InvalidWeights, "weights must be nonnegative");
    if (c.basisIndex < 0 || c.basisIndex >= classicalDim) {
      throw Error(ErrorKind::DimensionMismatch, "classical basis index out of range");
    }
    if (c.state.dim() != quantumDim) {
      throw Error(ErrorKind::DimensionMismatch, "component states differ in dimension");
    }
    sum += c.weight;
  }
  if (std::abs(sum - 1.0) > tol.weights) throw Error(ErrorKind::InvalidWeights, "weights must sum to 1");
  CMatrix rho = CMatrix::Zero(quantumDim * classicalDim, quantumDim * classicalDim);
  for (const auto& c : components) {
    CMatrix proj = CMatrix::Zero(classicalDim, classicalDim);
    proj(c.basisIndex, c.basisIndex) = 1.0;
    rho += c.weight * (classicalFirst ? qmatrix::kron(proj, c.state.matrix())
                                      : qmatrix::kron(c.state.matrix(), proj));
  }
  return rho;
}

}  // namespace

DensityMatrix quantum_classical(const std::vector<ClassicalComponent>& components, int classicalDim,
                                const Tolerances& tol) {
  int q = 0;
  CMatrix rho = classical_mixture(components, classicalDim, false, q, tol);
  return DensityMatrix(rho, {q, classicalDim}, "quantum_classical", tol);
}

DensityMatrix classical_quantum(const std::vector<ClassicalComponent>& components, int classicalDim,
                                const Tolerances& tol) {
  int q = 0;
  CMatrix rho = classical_mixture(components, classicalDim, true, q, tol);
  return DensityMatrix(rho, {classicalDim, q}, "classical_quantum", tol);
}

namespace {

CMatrix ginibre(int rows, int cols, std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CMatrix g(rows, cols);
  // Column-major fill order, real part before imaginary, fixes the draw sequence.
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      const double re = normal(gen);
      const double im = normal(gen);
      g(i, j) = Complex(re, im);
    }
  }
  return g;
}

}  // namespace

DensityMatrix random_density(const std::vector<int>& dims, int rank, std::mt19937_64& gen) {
  const int d = qmatrix::dimension_product(dims);
  if (rank < 1 || rank > d) throw Error(ErrorKind::OutOfRange, "rank must lie in [1, dim]");
  const CMatrix g = ginibre(d, rank, gen);
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(rho, dims, "random");
}

DensityMatrix random_density(const std::vector<int>& dims, int rank, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  return random_density(dims, rank, gen);
}

CMatrix haar_unitary(int dim, std::mt19937_64& gen) {
  const CMatrix z = ginibre(dim, dim, gen);
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < dim; ++k) {
    const double mag = std::abs(r(k, k));
    if (mag > 0.0) q.col(k) *= r(k, k) / mag;
  }
  return q;
}

CVector pure_vector_from_schmidt(const std::vector<double>& coefficients, const Tolerances& tol) {
  double norm2 = 0.0;
  for (double c : coefficients) {
    if (!(c >= 0.0)) throw Error(ErrorKind::NotNormalized, "Schmidt coefficients must be nonnegative");
    norm2 += c * c;
  }
  if (coefficients.empty() || std::abs(norm2 - 1.0) > tol.weights) {
    throw Error(ErrorKind::NotNormalized, "Schmidt coefficients must satisfy sum c^2 = 1");
  }
  const int d = static_cast<int>(coefficients.size());
  CVector psi = CVector::Zero(d * d);
  for (int i = 0; i < d; ++i) psi(i * d + i) = coefficients[i];
  return psi;
}

DensityMatrix pure_from_schmidt(const std::vector<double>& coefficients, const Tolerances& tol) {
  const CVector psi = pure_vector_from_schmidt(coefficients, tol);
  const int d = static_cast<int>(coefficients.size());
  return DensityMatrix(psi * psi.adjoint(), {d, d}, "pure_schmidt");
}

DensityMatrix pure(const CVector& psi, std::vector<int> dims, const Tolerances& tol) {
  if (std::abs(psi.norm() - 1.0) > tol.normalization) {
    throw Error(ErrorKind::NotNormalized, "state vector is not normalized");
  }
  return DensityMatrix(psi * psi.adjoint(), std::move(dims), "pure", tol);
}

DensityMatrix maximally_mixed(int dim) {
  return DensityMatrix(CMatrix::Identity(dim, dim) / static_cast<double>(dim), {dim});
}

}  // namespace states
}  // namespace minbs
