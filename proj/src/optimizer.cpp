#include "minbs/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "minbs/error.hpp"

namespace minbs {

// ---------------------------------------------------------------------------
// Invariant measurements

CMatrix InvariantMeasurement::basis() const {
  CMatrix out(referenceDim, referenceDim);
  Eigen::Index col = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto k = blocks[b].basis.cols();
    out.middleCols(col, k) = blocks[b].basis * blockUnitaries[b];
    col += k;
  }
  return out;
}

std::vector<CMatrix> InvariantMeasurement::projectors() const {
  const CMatrix b = basis();
  std::vector<CMatrix> out;
  out.reserve(static_cast<std::size_t>(b.cols()));
  for (Eigen::Index g = 0; g < b.cols(); ++g) out.push_back(b.col(g) * b.col(g).adjoint());
  return out;
}

double gap_tolerance(const RVector& ascendingEigenvalues, double relativeGap) {
  if (ascendingEigenvalues.size() == 0) return relativeGap;
  const double range = ascendingEigenvalues.maxCoeff() - ascendingEigenvalues.minCoeff();
  return relativeGap * std::max(1.0, range);
}

std::vector<InvariantBlock> invariant_blocks(const CMatrix& rhoRef, double gapTolerance,
                                             const Tolerances& tol) {
  const EigenSystem es = qmatrix::hermitian_eig(rhoRef, tol);
  std::vector<InvariantBlock> blocks;
  const auto d = es.values.size();
  Eigen::Index start = 0;
  for (Eigen::Index i = 1; i <= d; ++i) {
    if (i == d || es.values(i) - es.values(i - 1) >= gapTolerance) {
      InvariantBlock block;
      block.eigenvalue = es.values.segment(start, i - start).mean();
      block.basis = es.vectors.middleCols(start, i - start);
      blocks.push_back(std::move(block));
      start = i;
    }
  }
  return blocks;
}

InvariantMeasurement eigenbasis_measurement(std::vector<InvariantBlock> blocks) {
  InvariantMeasurement m;
  for (const auto& b : blocks) {
    m.referenceDim = static_cast<int>(b.basis.rows());
    m.blockUnitaries.push_back(CMatrix::Identity(b.basis.cols(), b.basis.cols()));
  }
  m.blocks = std::move(blocks);
  return m;
}

InvariantMeasurement measurement_from_basis(std::vector<InvariantBlock> blocks, const CMatrix& basis,
                                            const Tolerances& tol) {
  InvariantMeasurement m;
  m.referenceDim = static_cast<int>(basis.rows());
  std::vector<std::vector<Eigen::Index>> assigned(blocks.size());
  for (Eigen::Index g = 0; g < basis.cols(); ++g) {
    std::size_t best = 0;
    double bestWeight = -1.0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const double w = (blocks[b].basis.adjoint() * basis.col(g)).squaredNorm();
      if (w > bestWeight) {
        bestWeight = w;
        best = b;
      }
    }
    if (std::abs(bestWeight - 1.0) > std::sqrt(tol.measurement)) {
      throw Error(ErrorKind::InvalidMeasurement, "basis vector straddles eigenspaces of the reference");
    }
    assigned[best].push_back(g);
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto k = blocks[b].basis.cols();
    if (static_cast<Eigen::Index>(assigned[b].size()) != k) {
      throw Error(ErrorKind::InvalidMeasurement, "basis does not fill every eigenspace");
    }
    CMatrix u(k, k);
    for (Eigen::Index c = 0; c < k; ++c) u.col(c) = blocks[b].basis.adjoint() * basis.col(assigned[b][c]);
    m.blockUnitaries.push_back(std::move(u));
  }
  m.blocks = std::move(blocks);
  return m;
}

MeasurementAudit audit_measurement(const InvariantMeasurement& measurement, const CMatrix& rhoRef) {
  MeasurementAudit audit;
  const CMatrix b = measurement.basis();
  const auto d = b.rows();
  audit.orthonormality = (b.adjoint() * b - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff();
  CMatrix sum = CMatrix::Zero(d, d);
  CMatrix dephased = CMatrix::Zero(d, d);
  for (Eigen::Index g = 0; g < b.cols(); ++g) {
    const CMatrix p = b.col(g) * b.col(g).adjoint();
    sum += p;
    dephased += p * rhoRef * p;
  }
  audit.completeness = (sum - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff();
  audit.disturbance = (dephased - rhoRef).cwiseAbs().maxCoeff();
  return audit;
}

// ---------------------------------------------------------------------------
// Objective

SkewObjective::SkewObjective(const CMatrix& sqrtRho, int left, int middle, int right) : middle_(middle) {
  const int outer = left * right;
  if (left < 1 || middle < 1 || right < 1 || sqrtRho.rows() != outer * middle ||
      sqrtRho.cols() != outer * middle) {
    throw Error(ErrorKind::DimensionMismatch, "square root does not match (left, middle, right)");
  }
  auto index = [&](int outerIndex, int x) {
    const int a = outerIndex / right;
    const int d = outerIndex % right;
    return (a * middle + x) * right + d;
  };
  for (int alpha = 0; alpha < outer; ++alpha) {
    for (int beta = alpha; beta < outer; ++beta) {
      CMatrix blk(middle, middle);
      for (int x = 0; x < middle; ++x) {
        for (int y = 0; y < middle; ++y) blk(x, y) = sqrtRho(index(alpha, x), index(beta, y));
      }
      // Blocks below 1e-15 contribute under 1e-30 per projector.
      if (blk.norm() < 1e-15) continue;
      blocks_.push_back(std::move(blk));
      weights_.push_back(alpha == beta ? 1.0 : 2.0);
    }
  }
}

double SkewObjective::evaluate(const CMatrix& basis) const {
  double total = 0.0;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const CMatrix projected = basis.adjoint() * blocks_[k] * basis;
    total += weights_[k] * projected.diagonal().squaredNorm();
  }
  return total;
}

SkewObjective::PairForms SkewObjective::pair_forms(const CVector& ep, const CVector& eq) const {
  PairForms f;
  const std::size_t n = blocks_.size();
  f.pp.resize(n);
  f.pq.resize(n);
  f.qp.resize(n);
  f.qq.resize(n);
  f.weight = weights_;
  for (std::size_t k = 0; k < n; ++k) {
    const CVector bp = blocks_[k] * ep;
    const CVector bq = blocks_[k] * eq;
    f.pp[k] = ep.dot(bp);
    f.pq[k] = ep.dot(bq);
    f.qp[k] = eq.dot(bp);
    f.qq[k] = eq.dot(bq);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Search

namespace {

constexpr double kQuarterPi = std::numbers::pi / 4.0;

// Objective contribution of the rotated pair
//   e_p' = cos(t) e_p + sin(t) w e_q,  e_q' = -sin(t) conj(w) e_p + cos(t) e_q.
// The projector pair repeats with period pi/2 in t.
double pair_value(const SkewObjective::PairForms& f, Complex w, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  double total = 0.0;
  for (std::size_t k = 0; k < f.weight.size(); ++k) {
    const Complex mix = c * s * (w * f.pq[k] + std::conj(w) * f.qp[k]);
    const Complex p = c * c * f.pp[k] + mix + s * s * f.qq[k];
    const Complex q = s * s * f.pp[k] - mix + c * c * f.qq[k];
    total += f.weight[k] * (std::norm(p) + std::norm(q));
  }
  return total;
}

struct LineResult {
  double theta = 0.0;
  double improvement = 0.0;
  long long evaluations = 0;
};

LineResult line_scan(const SkewObjective::PairForms& f, Complex w, const OptimizerConfig& cfg) {
  LineResult out;
  const double base = pair_value(f, w, 0.0);
  const int n = std::max(4, cfg.gridPoints);
  const double step = 2.0 * kQuarterPi / n;
  double bestTheta = 0.0;
  double bestValue = base;
  for (int i = 0; i < n; ++i) {
    const double theta = -kQuarterPi + i * step;
    const double v = pair_value(f, w, theta);
    ++out.evaluations;
    if (v < bestValue) {
      bestValue = v;
      bestTheta = theta;
    }
  }
  // Golden-section refinement around the best grid point.
  constexpr double kInvPhi = 0.61803398874989484820;
  double lo = bestTheta - step;
  double hi = bestTheta + step;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = pair_value(f, w, x1);
  double f2 = pair_value(f, w, x2);
  out.evaluations += 2;
  while (hi - lo > cfg.stepTolerance) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = pair_value(f, w, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = pair_value(f, w, x2);
    }
    ++out.evaluations;
    if (f1 < bestValue) {
      bestValue = f1;
      bestTheta = x1;
    }
    if (f2 < bestValue) {
      bestValue = f2;
      bestTheta = x2;
    }
  }
  out.theta = bestTheta;
  out.improvement = base - bestValue;
  return out;
}

void rotate_pair(CMatrix& basis, Eigen::Index p, Eigen::Index q, Complex w, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const CVector ep = basis.col(p);
  const CVector eq = basis.col(q);
  basis.col(p) = c * ep + s * w * eq;
  basis.col(q) = -s * std::conj(w) * ep + c * eq;
}

// Re-orthonormalizes the columns of each block inside its eigenspace.
void reorthonormalize(CMatrix& basis, const std::vector<InvariantBlock>& blocks) {
  Eigen::Index col = 0;
  for (const auto& block : blocks) {
    const auto k = block.basis.cols();
    if (k > 1) {
      CMatrix local = block.basis.adjoint() * basis.middleCols(col, k);
      Eigen::HouseholderQR<CMatrix> qr(local);
      CMatrix q = qr.householderQ();
      const CMatrix r = qr.matrixQR();
      for (Eigen::Index i = 0; i < k; ++i) {
        const double mag = std::abs(r(i, i));
        if (mag > 0.0) q.col(i) *= r(i, i) / mag;
      }
      basis.middleCols(col, k) = block.basis * q;
    }
    col += k;
  }
}

struct RestartOutcome {
  double objective = 0.0;
  CMatrix basis;
  long long evaluations = 0;
};

RestartOutcome run_restart(const SkewObjective& objective, const std::vector<InvariantBlock>& blocks,
                           const OptimizerConfig& cfg, int restart, const CMatrix* auditReference) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(cfg.seed >> 32), static_cast<std::uint32_t>(restart)};
  std::mt19937_64 gen(seq);

  const int dim = objective.middle();
  RestartOutcome out;
  out.basis.resize(dim, dim);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;
  Eigen::Index col = 0;
  for (const auto& block : blocks) {
    const auto k = block.basis.cols();
    out.basis.middleCols(col, k) = k > 1 ? CMatrix(block.basis * states::haar_unitary(static_cast<int>(k), gen))
                                         : block.basis;
    ranges.emplace_back(col, k);
    col += k;
  }

  const std::array<Complex, 2> phases{Complex(1.0, 0.0), Complex(0.0, 1.0)};
  double current = objective.evaluate(out.basis);
  ++out.evaluations;
  for (int sweep = 0; sweep < cfg.maxIterations; ++sweep) {
    double sweepGain = 0.0;
    for (const auto& [start, k] : ranges) {
      for (Eigen::Index p = start; p < start + k; ++p) {
        for (Eigen::Index q = p + 1; q < start + k; ++q) {
          for (const Complex w : phases) {
            const auto forms = objective.pair_forms(out.basis.col(p), out.basis.col(q));
            const LineResult line = line_scan(forms, w, cfg);
            out.evaluations += line.evaluations;
            if (line.improvement > 0.0) {
              rotate_pair(out.basis, p, q, w, line.theta);
              sweepGain += line.improvement;
              if (auditReference != nullptr) {
                const auto m = measurement_from_basis(blocks, out.basis);
                const auto audit = audit_measurement(m, *auditReference);
                if (audit.disturbance > 1e-9 || audit.completeness > 1e-10) {
                  throw Error(ErrorKind::NumericalFailure, "search left the invariant measurement set");
                }
              }
            }
          }
        }
      }
    }
    reorthonormalize(out.basis, blocks);
    const double next = objective.evaluate(out.basis);
    ++out.evaluations;
    current = next;
    if (sweepGain < cfg.valueTolerance) break;
  }
  out.objective = current;
  return out;
}

}  // namespace

OptimizationOutcome minimize_objective(const SkewObjective& objective,
                                       const std::vector<InvariantBlock>& blocks,
                                       const OptimizerConfig& config, const CMatrix* auditReference) {
  if (config.restarts < 1) throw Error(ErrorKind::OutOfRange, "optimizer needs at least one restart");
  int total = 0;
  bool searchable = false;
  for (const auto& b : blocks) {
    total += static_cast<int>(b.basis.cols());
    searchable = searchable || b.basis.cols() > 1;
  }
  if (total != objective.middle()) {
    throw Error(ErrorKind::DimensionMismatch, "blocks do not span the measured subsystem");
  }

  OptimizationOutcome outcome;
  if (!searchable) {
    outcome.measurement = eigenbasis_measurement(blocks);
    outcome.bestObjective = objective.evaluate(outcome.measurement.basis());
    outcome.restartObjectives = {outcome.bestObjective};
    outcome.evaluations = 1;
    return outcome;
  }

  std::vector<RestartOutcome> results(static_cast<std::size_t>(config.restarts));
  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, config.restarts);
  if (threads == 1) {
    for (int r = 0; r < config.restarts; ++r) results[r] = run_restart(objective, blocks, config, r, auditReference);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (int r = t; r < config.restarts; r += threads) {
            results[r] = run_restart(objective, blocks, config, r, auditReference);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Lowest objective wins; ties go to the lower restart index.
  int best = 0;
  for (int r = 0; r < config.restarts; ++r) {
    outcome.restartObjectives.push_back(results[r].objective);
    outcome.evaluations += results[r].evaluations;
    if (results[r].objective < results[best].objective) best = r;
  }
  outcome.bestRestart = best;
  outcome.bestObjective = results[best].objective;
  outcome.measurement = measurement_from_basis(blocks, results[best].basis);
  return outcome;
}

void record_dispersion(const OptimizationOutcome& outcome, MeasureResult& result) {
  std::vector<double> values = outcome.restartObjectives;
  if (values.empty()) return;
  std::sort(values.begin(), values.end());
  const double best = values.front();
  const auto within = std::count_if(values.begin(), values.end(), [&](double v) { return v - best <= 1e-4; });
  // Reported in measure units (1 - objective): best is the largest value.
  result.diagnostics["restart_best"] = 1.0 - values.front();
  result.diagnostics["restart_median"] = 1.0 - values[values.size() / 2];
  result.diagnostics["restart_worst"] = 1.0 - values.back();
  result.diagnostics["restart_fraction_within_1e-4"] = static_cast<double>(within) / values.size();
  result.diagnostics["restarts"] = static_cast<double>(values.size());
  result.diagnostics["best_restart"] = outcome.bestRestart;
  result.diagnostics["objective_evaluations"] = static_cast<double>(outcome.evaluations);
}

namespace {

MeasureResult finish(const OptimizationOutcome& outcome, const CMatrix& rhoRef, const Tolerances& tol) {
  MeasureResult result;
  result.method = Method::Optimizer;
  result.value = clamp_unit(1.0 - outcome.bestObjective, result, tol.clampWarning);
  const MeasurementAudit audit = audit_measurement(outcome.measurement, rhoRef);
  result.diagnostics["measurement_completeness"] = audit.completeness;
  result.diagnostics["measurement_disturbance"] = audit.disturbance;
  if (audit.completeness > tol.measurement || audit.disturbance > 1e-9) {
    std::ostringstream os;
    os << "optimal measurement violates invariance (completeness " << audit.completeness
       << ", disturbance " << audit.disturbance << ")";
    throw Error(ErrorKind::NumericalFailure, os.str());
  }
  result.optimalMeasurement = outcome.measurement;
  record_dispersion(outcome, result);
  return result;
}

}  // namespace

MeasureResult maximize_minbs(const BilocalInput& input, const OptimizerConfig& config, const Tolerances& tol) {
  const int m = input.m(), n = input.n(), u = input.u(), v = input.v();
  const CMatrix root = qmatrix::kron(input.rhoAB.sqrt(tol), input.rhoCD.sqrt(tol));
  const CMatrix rhoBC = qmatrix::kron(input.rhoAB.marginal({1}).matrix(), input.rhoCD.marginal({0}).matrix());
  const EigenSystem es = qmatrix::hermitian_eig(rhoBC, tol);
  const auto blocks = invariant_blocks(rhoBC, gap_tolerance(es.values, tol.degeneracyGap), tol);
  const SkewObjective objective(root, m, n * u, v);
  const auto outcome = minimize_objective(objective, blocks, config, config.auditEveryStep ? &rhoBC : nullptr);
  return finish(outcome, rhoBC, tol);
}

MeasureResult maximize_min_s(const DensityMatrix& rho, const OptimizerConfig& config, const Tolerances& tol) {
  if (rho.dims().size() != 2) throw Error(ErrorKind::DimensionMismatch, "expected a bipartite state");
  const int m = rho.dims()[0], n = rho.dims()[1];
  const CMatrix rhoA = rho.marginal({0}).matrix();
  const EigenSystem es = qmatrix::hermitian_eig(rhoA, tol);
  const auto blocks = invariant_blocks(rhoA, gap_tolerance(es.values, tol.degeneracyGap), tol);
  const SkewObjective objective(rho.sqrt(tol), 1, m, n);
  const auto outcome = minimize_objective(objective, blocks, config, config.auditEveryStep ? &rhoA : nullptr);
  return finish(outcome, rhoA, tol);
}

}  // namespace minbs
