#include "minbs/qmatrix.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

#include "minbs/error.hpp"

namespace minbs::qmatrix {

namespace {

// Digits of a flat index in the mixed radix given by dims (most significant first).
void unflatten(int index, std::span<const int> dims, std::vector<int>& digits) {
  digits.resize(dims.size());
  for (std::size_t k = dims.size(); k-- > 0;) {
    digits[k] = index % dims[k];
    index /= dims[k];
  }
}

void check_dims(const CMatrix& m, std::span<const int> dims) {
  if (dims.empty() || std::any_of(dims.begin(), dims.end(), [](int d) { return d < 1; })) {
    throw Error(ErrorKind::DimensionMismatch, "subsystem dimensions must be positive");
  }
  const int total = dimension_product(dims);
  if (m.rows() != total || m.cols() != total) {
    std::ostringstream os;
    os << "matrix is " << m.rows() << "x" << m.cols() << " but dims multiply to " << total;
    throw Error(ErrorKind::DimensionMismatch, os.str());
  }
}

}  // namespace

int dimension_product(std::span<const int> dims) {
  return std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<>());
}

double hermiticity_deviation(const CMatrix& h) {
  if (h.rows() != h.cols()) return std::numeric_limits<double>::infinity();
  if (h.size() == 0) return 0.0;
  return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

EigenSystem hermitian_eig(const CMatrix& h, const Tolerances& tol) {
  if (h.rows() != h.cols()) {
    throw Error(ErrorKind::NotHermitian, "matrix is not square");
  }
  const double dev = hermiticity_deviation(h);
  if (!(dev <= tol.hermiticity)) {
    std::ostringstream os;
    os << "hermiticity deviation " << dev;
    throw Error(ErrorKind::NotHermitian, os.str());
  }
  // Symmetrize so the solver sees an exactly Hermitian input.
  const CMatrix sym = (h + h.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalFailure, "Hermitian eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

CMatrix psd_sqrt(const CMatrix& rho, const Tolerances& tol) {
  const EigenSystem es = hermitian_eig(rho, tol);
  if (es.values.size() > 0 && es.values.minCoeff() < -tol.psdClamp) {
    std::ostringstream os;
    os << "minimum eigenvalue " << es.values.minCoeff();
    throw Error(ErrorKind::NotPSD, os.str());
  }
  return spectral_apply(es, [](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; });
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

RMatrix kron(const RMatrix& a, const RMatrix& b) {
  RMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

CMatrix identity(int dim) { return CMatrix::Identity(dim, dim); }

CMatrix partial_trace(const CMatrix& m, std::span<const int> dims, std::span<const int> keep) {
  check_dims(m, dims);
  const int n = static_cast<int>(dims.size());
  std::vector<bool> kept(n, false);
  for (int k : keep) {
    if (k < 0 || k >= n || kept[k]) {
      throw Error(ErrorKind::DimensionMismatch, "keep index out of range or repeated");
    }
    kept[k] = true;
  }
  std::vector<int> keptDims;
  for (int k = 0; k < n; ++k) {
    if (kept[k]) keptDims.push_back(dims[k]);
  }
  const int outDim = dimension_product(keptDims);
  const int total = static_cast<int>(m.rows());

  // Precompute, for every flat index, its reduced (kept) index and traced index.
  std::vector<int> reduced(total), traced(total);
  std::vector<int> digits;
  for (int idx = 0; idx < total; ++idx) {
    unflatten(idx, dims, digits);
    int r = 0, t = 0;
    for (int k = 0; k < n; ++k) {
      if (kept[k]) {
        r = r * dims[k] + digits[k];
      } else {
        t = t * dims[k] + digits[k];
      }
    }
    reduced[idx] = r;
    traced[idx] = t;
  }

  CMatrix out = CMatrix::Zero(outDim, outDim);
  for (int i = 0; i < total; ++i) {
    for (int j = 0; j < total; ++j) {
      if (traced[i] == traced[j]) out(reduced[i], reduced[j]) += m(i, j);
    }
  }
  return out;
}

CMatrix permute_subsystems(const CMatrix& m, std::span<const int> dims, std::span<const int> perm) {
  check_dims(m, dims);
  const int n = static_cast<int>(dims.size());
  if (static_cast<int>(perm.size()) != n) {
    throw Error(ErrorKind::DimensionMismatch, "permutation length differs from subsystem count");
  }
  std::vector<int> sorted(perm.begin(), perm.end());
  std::sort(sorted.begin(), sorted.end());
  for (int k = 0; k < n; ++k) {
    if (sorted[k] != k) throw Error(ErrorKind::DimensionMismatch, "not a permutation");
  }
  std::vector<int> newDims(n);
  for (int k = 0; k < n; ++k) newDims[k] = dims[perm[k]];

  const int total = static_cast<int>(m.rows());
  std::vector<int> mapped(total);
  std::vector<int> digits;
  for (int idx = 0; idx < total; ++idx) {
    unflatten(idx, dims, digits);
    int out = 0;
    for (int k = 0; k < n; ++k) out = out * newDims[k] + digits[perm[k]];
    mapped[idx] = out;
  }
  CMatrix result(total, total);
  for (int i = 0; i < total; ++i) {
    for (int j = 0; j < total; ++j) result(mapped[i], mapped[j]) = m(i, j);
  }
  return result;
}

SchmidtDecomposition schmidt(const CVector& psi, int dimLeft, int dimRight, const Tolerances& tol) {
  if (dimLeft < 1 || dimRight < 1 || psi.size() != static_cast<Eigen::Index>(dimLeft) * dimRight) {
    throw Error(ErrorKind::DimensionMismatch, "state length must equal dimLeft * dimRight");
  }
  const double norm = psi.norm();
  if (std::abs(norm - 1.0) > tol.normalization) {
    std::ostringstream os;
    os << "state norm " << norm;
    throw Error(ErrorKind::NotNormalized, os.str());
  }
  // psi[i * dimRight + j] = M(i, j) = sum_k s_k U(i,k) conj(V(j,k)).
  CMatrix coeffs(dimLeft, dimRight);
  for (int i = 0; i < dimLeft; ++i) {
    for (int j = 0; j < dimRight; ++j) coeffs(i, j) = psi(i * dimRight + j);
  }
  Eigen::JacobiSVD<CMatrix> svd(coeffs, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.singularValues(), svd.matrixU(), svd.matrixV().conjugate()};
}

Complex hs_inner(const CMatrix& a, const CMatrix& b) { return (a.adjoint() * b).trace(); }

Complex trace_product(const CMatrix& a, const CMatrix& b) {
  return a.cwiseProduct(b.transpose()).sum();
}

}  // namespace minbs::qmatrix
