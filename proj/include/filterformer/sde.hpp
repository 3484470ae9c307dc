#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "filterformer/gaussian.hpp"
#include "filterformer/paths.hpp"

namespace filterformer {

/// Rows 0..k of the observation path: everything a nonanticipative
/// coefficient may look at when evaluated at t_k.
using ObservationPrefix = Eigen::Ref<const Mat>;

using VectorCoefficient = std::function<Vec(double, const ObservationPrefix&)>;
using MatrixCoefficient = std::function<Mat(double, const ObservationPrefix&)>;

/// One evaluation of every coefficient at (t, y_[0:t]).
struct CoefficientValues {
  Vec a0;
  Mat a1, b1, b2;
  Vec big_a0;
  Mat big_a1, big_b1, big_b2;

  Mat bob() const { return b1 * b1.transpose() + b2 * b2.transpose(); }
  Mat boB() const { return b1 * big_b1.transpose() + b2 * big_b2.transpose(); }
  Mat BoB() const { return big_b1 * big_b1.transpose() + big_b2 * big_b2.transpose(); }
};

/// Coefficients of the coupled signal/observation system
///   dX = [a0 + a1 X] dt + b1 dW1 + b2 dW2,
///   dY = [A0 + A1 X] dt + B1 dW1 + B2 dW2,
/// each a functional of time and the observation prefix. W1 is
/// signal_dim-dimensional, W2 observation_dim-dimensional.
struct CoefficientSet {
  Index signal_dim = 1;
  Index observation_dim = 1;

  VectorCoefficient a0;
  MatrixCoefficient a1, b1, b2;
  VectorCoefficient big_a0;
  MatrixCoefficient big_a1, big_b1, big_b2;

  /// Entry bound on a1 and A1; checked on every evaluation.
  double entry_bound = std::numeric_limits<double>::infinity();
  /// Required lower bound on the minimum eigenvalue of B∘B (oracle only).
  double bob_floor = 1e-10;

  /// Evaluates and shape-checks all coefficients; throws kDimensionMismatch
  /// or kAssumptionViolation.
  CoefficientValues evaluate(double t, const ObservationPrefix& prefix) const;
};

/// Time-invariant linear system with constant coefficient matrices.
struct LinearSystem {
  Vec a0;
  Mat a1, b1, b2;
  Vec big_a0;
  Mat big_a1, big_b1, big_b2;

  Index signal_dim() const { return a1.rows(); }
  Index observation_dim() const { return big_a1.rows(); }
  CoefficientSet coefficients() const;
};

/// Scalar system with a1 = a, b1 = b, A1 = A, B2 = B and everything else
/// zero, so b∘b = b^2, B∘B = B^2, b∘B = 0.
LinearSystem scalar_kalman(double a, double b, double big_a, double big_b);

/// Stationary root (aB^2 + B sqrt(a^2 B^2 + A^2 b^2)) / A^2 of the scalar
/// Riccati equation 2a S + b^2 - S^2 A^2 / B^2 = 0.
double scalar_stationary_variance(double a, double b, double big_a, double big_b);

/// Scalar conditionally Gaussian system whose mean reversion depends on
/// the current observation: a1 = -(rate + swing * sin(y_t)).
CoefficientSet observation_modulated(double rate, double swing, double b, double big_a, double big_b);

struct SimConfig {
  double horizon = 1.0;
  Index steps = 256;
  std::uint64_t seed = 0;
  Gaussian x0_law = Gaussian(Vec::Zero(1), Mat::Identity(1, 1));
  Vec y0 = Vec::Zero(1);

  void validate() const;
};

struct SimulatedPair {
  SampledPath signal;
  SampledPath observation;
};

/// Euler–Maruyama on the coupled system with shared increments dW1, dW2.
/// Deterministic in cfg.seed. Throws StepError(kDivergence) on a
/// non-finite state.
SimulatedPair simulate(const CoefficientSet& coeffs, const SimConfig& cfg);

/// The same scheme driven by given X_0 and Brownian increments (row k of
/// dw1, dw2 is the increment over step k). cfg.seed and cfg.x0_law are
/// ignored.
SimulatedPair simulate_driven(const CoefficientSet& coeffs, const SimConfig& cfg, const Vec& x0, const Mat& dw1,
                              const Mat& dw2);

/// Draws X_0 from law using `rng` (Cholesky factor with PSD fallback).
Vec sample_gaussian(const Gaussian& law, Rng& rng);

}  // namespace filterformer
