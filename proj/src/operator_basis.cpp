#include "minbs/operator_basis.hpp"

#include <cmath>
#include <sstream>

#include "minbs/error.hpp"

namespace minbs::operator_basis {

HermitianBasis gell_mann_basis(int dim) {
  if (dim < 1) throw Error(ErrorKind::OutOfRange, "basis dimension must be positive");
  HermitianBasis basis;
  basis.dim = dim;
  basis.elements.reserve(static_cast<std::size_t>(dim) * dim);
  basis.elements.push_back(CMatrix::Identity(dim, dim) / std::sqrt(static_cast<double>(dim)));

  const double half = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < dim; ++j) {
    for (int k = j + 1; k < dim; ++k) {
      CMatrix s = CMatrix::Zero(dim, dim);
      s(j, k) = half;
      s(k, j) = half;
      basis.elements.push_back(std::move(s));
    }
  }
  for (int j = 0; j < dim; ++j) {
    for (int k = j + 1; k < dim; ++k) {
      CMatrix a = CMatrix::Zero(dim, dim);
      a(j, k) = Complex(0.0, -half);
      a(k, j) = Complex(0.0, half);
      basis.elements.push_back(std::move(a));
    }
  }
  for (int l = 1; l < dim; ++l) {
    // diag(1, ..., 1, -l, 0, ...) with l leading ones, unit Hilbert-Schmidt norm.
    const double scale = 1.0 / std::sqrt(static_cast<double>(l) * (l + 1));
    CMatrix d = CMatrix::Zero(dim, dim);
    for (int i = 0; i < l; ++i) d(i, i) = scale;
    d(l, l) = -l * scale;
    basis.elements.push_back(std::move(d));
  }
  return basis;
}

RMatrix gram_matrix(const HermitianBasis& basis) {
  const auto count = static_cast<Eigen::Index>(basis.elements.size());
  RMatrix g(count, count);
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < count; ++j) {
      g(i, j) = qmatrix::trace_product(basis.elements[i], basis.elements[j]).real();
    }
  }
  return g;
}

RVector expand(const CMatrix& hermitian, const HermitianBasis& basis, const Tolerances& tol) {
  if (hermitian.rows() != basis.dim || hermitian.cols() != basis.dim) {
    throw Error(ErrorKind::DimensionMismatch, "operator and basis dimensions differ");
  }
  RVector out(static_cast<Eigen::Index>(basis.elements.size()));
  for (std::size_t k = 0; k < basis.elements.size(); ++k) {
    const Complex c = qmatrix::trace_product(hermitian, basis.elements[k]);
    if (std::abs(c.imag()) > tol.imagResidue) {
      throw Error(ErrorKind::NumericalFailure, "coefficient has non-negligible imaginary part");
    }
    out(static_cast<Eigen::Index>(k)) = c.real();
  }
  return out;
}

CorrelationMatrix correlation_matrix_of_root(const CMatrix& sqrtRho, const HermitianBasis& basisA,
                                             const HermitianBasis& basisB, const Tolerances& tol) {
  const int dA = basisA.dim;
  const int dB = basisB.dim;
  if (sqrtRho.rows() != dA * dB || sqrtRho.cols() != dA * dB) {
    throw Error(ErrorKind::DimensionMismatch, "basis dimensions do not match the state");
  }
  CorrelationMatrix t;
  t.rowDim = dA;
  t.colDim = dB;
  t.entries.resize(dA * dA, dB * dB);
  for (int i = 0; i < dA * dA; ++i) {
    for (int j = 0; j < dB * dB; ++j) {
      const Complex c =
          qmatrix::trace_product(sqrtRho, qmatrix::kron(basisA.elements[i], basisB.elements[j]));
      if (std::abs(c.imag()) > tol.imagResidue) {
        std::ostringstream os;
        os << "correlation entry (" << i << "," << j << ") has imaginary part " << c.imag();
        throw Error(ErrorKind::NumericalFailure, os.str());
      }
      t.entries(i, j) = c.real();
    }
  }
  return t;
}

CorrelationMatrix correlation_matrix(const DensityMatrix& rho, const HermitianBasis& basisA,
                                     const HermitianBasis& basisB, const Tolerances& tol) {
  if (rho.dims().size() != 2 || rho.dims()[0] != basisA.dim || rho.dims()[1] != basisB.dim) {
    throw Error(ErrorKind::DimensionMismatch, "correlation matrix needs a bipartite state matching the bases");
  }
  return correlation_matrix_of_root(rho.sqrt(tol), basisA, basisB, tol);
}

CMatrix reconstruct(const CorrelationMatrix& t, const HermitianBasis& basisA,
                    const HermitianBasis& basisB) {
  const int d = basisA.dim * basisB.dim;
  CMatrix out = CMatrix::Zero(d, d);
  for (Eigen::Index i = 0; i < t.entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.entries.cols(); ++j) {
      if (t.entries(i, j) != 0.0) {
        out += t.entries(i, j) * qmatrix::kron(basisA.elements[i], basisB.elements[j]);
      }
    }
  }
  return out;
}

CorrelationMatrix bilocal_correlation_matrix(const CorrelationMatrix& tab, const CorrelationMatrix& tcd) {
  CorrelationMatrix out;
  out.entries = qmatrix::kron(RMatrix(tab.entries.transpose()), tcd.entries);
  out.rowDim = tab.colDim * tcd.rowDim;
  out.colDim = tab.rowDim * tcd.colDim;
  return out;
}

void check_projective_measurement(const std::vector<CMatrix>& projectors, const Tolerances& tol) {
  if (projectors.empty()) throw Error(ErrorKind::InvalidMeasurement, "empty measurement");
  const auto d = projectors.front().rows();
  if (static_cast<Eigen::Index>(projectors.size()) != d) {
    throw Error(ErrorKind::InvalidMeasurement, "rank-1 measurement needs exactly dim projectors");
  }
  CMatrix sum = CMatrix::Zero(d, d);
  for (std::size_t g = 0; g < projectors.size(); ++g) {
    const CMatrix& p = projectors[g];
    if (p.rows() != d || p.cols() != d) {
      throw Error(ErrorKind::InvalidMeasurement, "projector sizes differ");
    }
    if ((p * p - p).cwiseAbs().maxCoeff() > tol.measurement ||
        qmatrix::hermiticity_deviation(p) > tol.measurement) {
      throw Error(ErrorKind::InvalidMeasurement, "element is not an orthogonal projector");
    }
    if (std::abs(p.trace() - Complex(1.0, 0.0)) > tol.measurement) {
      throw Error(ErrorKind::InvalidMeasurement, "projector is not rank 1");
    }
    for (std::size_t h = g + 1; h < projectors.size(); ++h) {
      if ((p * projectors[h]).cwiseAbs().maxCoeff() > tol.measurement) {
        throw Error(ErrorKind::InvalidMeasurement, "projectors are not mutually orthogonal");
      }
    }
    sum += p;
  }
  if ((sum - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff() > tol.measurement) {
    throw Error(ErrorKind::InvalidMeasurement, "projectors do not sum to the identity");
  }
}

RMatrix measurement_expansion(const std::vector<CMatrix>& projectors, const HermitianBasis& basisB,
                              const HermitianBasis& basisC, const Tolerances& tol) {
  check_projective_measurement(projectors, tol);
  const int n = basisB.dim;
  const int u = basisC.dim;
  if (projectors.front().rows() != n * u) {
    throw Error(ErrorKind::DimensionMismatch, "measurement does not act on H_B (x) H_C");
  }
  const int nb = n * n;
  const int nc = u * u;
  std::vector<CMatrix> products;
  products.reserve(static_cast<std::size_t>(nb) * nc);
  for (int j = 0; j < nb; ++j) {
    for (int k = 0; k < nc; ++k) products.push_back(qmatrix::kron(basisB.elements[j], basisC.elements[k]));
  }
  RMatrix f(static_cast<Eigen::Index>(projectors.size()), nb * nc);
  for (std::size_t g = 0; g < projectors.size(); ++g) {
    for (int jk = 0; jk < nb * nc; ++jk) {
      f(static_cast<Eigen::Index>(g), jk) = qmatrix::trace_product(projectors[g], products[jk]).real();
    }
  }
  return f;
}

std::vector<CMatrix> projectors_from_basis(const CMatrix& basis) {
  std::vector<CMatrix> out;
  out.reserve(static_cast<std::size_t>(basis.cols()));
  for (Eigen::Index g = 0; g < basis.cols(); ++g) out.push_back(basis.col(g) * basis.col(g).adjoint());
  return out;
}

}  // namespace minbs::operator_basis
