#pragma once

namespace minbs {

/// Numerical thresholds shared by every module. Defaults are the values the
/// library is tested against; callers may pass a modified copy.
struct Tolerances {
  double hermiticity = 1e-9;      // max |H - H^dagger| entry
  double psdClamp = 1e-10;        // eigenvalues in [-psdClamp, 0) are clamped to 0
  double trace = 1e-9;            // |tr(rho) - 1|
  double normalization = 1e-9;    // | ||psi|| - 1 |
  double weights = 1e-12;         // sums of probability weights
  double imagResidue = 1e-10;     // dropped imaginary part of real coefficients
  double degeneracyGap = 1e-8;    // relative adjacent-eigenvalue gap
  double nearDegeneracyGap = 1e-4;  // closed forms also cross-checked below this gap
  double pureThreshold = 1e-9;    // largest eigenvalue >= 1 - pureThreshold
  double measurement = 1e-10;     // orthogonality / completeness of projectors
  double clampWarning = 1e-8;     // value clamps into [0, 1] larger than this are flagged
};

inline constexpr Tolerances kDefaultTolerances{};

}  // namespace minbs
