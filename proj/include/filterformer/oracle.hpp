#pragma once

#include <vector>

#include "filterformer/gaussian.hpp"
#include "filterformer/paths.hpp"
#include "filterformer/sde.hpp"

namespace filterformer {

/// Conditional laws N(mu_t, Sigma_t) of the signal given the observation
/// prefix, one per grid point.
struct FilterTrajectory {
  Vec grid;
  std::vector<Gaussian> states;

  const Gaussian& at(Index i) const { return states[static_cast<std::size_t>(i)]; }
  Index size() const { return grid.size(); }
};

/// Exact conditionally Gaussian filter along an observed path.
///
/// Per step t_k -> t_{k+1}, with coefficients evaluated on the frozen
/// prefix y_[0:t_k]:
///   Sigma: one classical RK4 step of
///          S' = a1 S + S a1' + b∘b - (b∘B + S A1') (B∘B)^{-1} (b∘B + S A1')',
///          then S <- (S + S')/2 and a Cholesky check;
///   mu:    mu += (a0 + a1 mu) dt
///               + (b∘B + S_k A1') (B∘B)^{-1} (dy_k - (A0 + A1 mu) dt).
/// Throws StepError(kRiccatiBlowup) when S stops being positive definite
/// and StepError(kAssumptionViolation) when B∘B is not uniformly PD.
FilterTrajectory run_oracle(const CoefficientSet& coeffs, const SampledPath& y, const Gaussian& init);

/// Textbook discrete Kalman filter on the Euler discretization of a linear
/// time-invariant system with b∘B = 0:
///   z_k = y_{k+1} - y_k = (A0 + A1 X_k) dt + v_k,    Cov v_k = B∘B dt,
///   X_{k+1} = (I + a1 dt) X_k + a0 dt + w_k,          Cov w_k = b∘b dt.
/// State k of the result is the prediction of X_k from z_0..z_{k-1}, which
/// is the same conditioning as the continuous-time filter at t_k.
FilterTrajectory discrete_kalman_reference(const LinearSystem& system, const SampledPath& y, const Gaussian& init);

/// Per-time W2 gaps between two trajectories on the same grid.
Vec trajectory_w2_gaps(const FilterTrajectory& a, const FilterTrajectory& b);

struct StabilityReport {
  Vec w2_gap;        ///< W2(f_t(y), f_t(y')) per grid time
  double input_gap;  ///< sup distance between the two observation paths
  double max_w2_gap() const { return w2_gap.maxCoeff(); }
};

/// Runs the oracle on both paths (same grid) and reports the output and
/// input gaps, the raw material of an empirical Lipschitz estimate.
StabilityReport perturbation_stability(const CoefficientSet& coeffs, const SampledPath& y,
                                       const SampledPath& y_perturbed, const Gaussian& init);

/// max over consecutive grid points of W2(f_{t_{i+1}}, f_{t_i}) / dt.
double time_lipschitz_estimate(const FilterTrajectory& trajectory);

}  // namespace filterformer
