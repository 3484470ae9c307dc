#include "filterformer/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "filterformer/error.hpp"

namespace filterformer {
namespace {

struct RiccatiTerms {
  Mat a1, bob, boB, big_a1, bob_inv;

  Mat rhs(const Mat& s) const {
    const Mat gain_core = boB + s * big_a1.transpose();
    return a1 * s + s * a1.transpose() + bob - gain_core * bob_inv * gain_core.transpose();
  }
};

Mat inverse_pd(const Mat& m, double floor, long step) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success || min_eigenvalue(m) < floor) {
    throw StepError(ErrorKind::kAssumptionViolation, step, "B∘B is not uniformly positive definite");
  }
  return llt.solve(Mat::Identity(m.rows(), m.cols()));
}

RiccatiTerms riccati_terms(const CoefficientValues& c, double floor, long step) {
  return {c.a1, c.bob(), c.boB(), c.big_a1, inverse_pd(c.BoB(), floor, step)};
}

}  // namespace

FilterTrajectory run_oracle(const CoefficientSet& coeffs, const SampledPath& y, const Gaussian& init) {
  require(y.dim() == coeffs.observation_dim, ErrorKind::kDimensionMismatch, "observation dimension differs from d_Y");
  require(init.dim() == coeffs.signal_dim, ErrorKind::kDimensionMismatch, "initial law dimension differs from d_X");
  Eigen::LLT<Mat> init_check(init.cov());
  require(init_check.info() == Eigen::Success, ErrorKind::kInvalidCovariance, "initial covariance must be PD");

  const Index steps = y.steps();
  const double dt = y.dt();
  const Mat& ys = y.values();

  FilterTrajectory out;
  out.grid = y.grid();
  out.states.reserve(static_cast<std::size_t>(steps + 1));
  out.states.push_back(init);

  Vec mu = init.mean();
  Mat sigma = init.cov();
  for (Index k = 0; k < steps; ++k) {
    const double t = y.grid()[k];
    const ObservationPrefix prefix = ys.topRows(k + 1);
    const CoefficientValues c0 = coeffs.evaluate(t, prefix);
    const RiccatiTerms r0 = riccati_terms(c0, coeffs.bob_floor, k);
    const RiccatiTerms r_mid = riccati_terms(coeffs.evaluate(t + 0.5 * dt, prefix), coeffs.bob_floor, k);
    const RiccatiTerms r_end = riccati_terms(coeffs.evaluate(t + dt, prefix), coeffs.bob_floor, k);

    const Vec dy = (ys.row(k + 1) - ys.row(k)).transpose();
    const Vec innovation = dy - (c0.big_a0 + c0.big_a1 * mu) * dt;
    const Mat gain = (r0.boB + sigma * c0.big_a1.transpose()) * r0.bob_inv;
    const Vec next_mu = mu + (c0.a0 + c0.a1 * mu) * dt + gain * innovation;

    const Mat k1 = r0.rhs(sigma);
    const Mat k2 = r_mid.rhs(sigma + 0.5 * dt * k1);
    const Mat k3 = r_mid.rhs(sigma + 0.5 * dt * k2);
    const Mat k4 = r_end.rhs(sigma + dt * k3);
    Mat next_sigma = sigma + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    next_sigma = 0.5 * (next_sigma + next_sigma.transpose());

    if (!next_mu.allFinite() || !next_sigma.allFinite()) {
      throw StepError(ErrorKind::kRiccatiBlowup, k + 1, "filter state became non-finite");
    }
    Eigen::LLT<Mat> pd(next_sigma);
    if (pd.info() != Eigen::Success) {
      throw StepError(ErrorKind::kRiccatiBlowup, k + 1, "covariance lost positive definiteness");
    }
    mu = next_mu;
    sigma = next_sigma;
    out.states.emplace_back(mu, sigma);
  }
  return out;
}

FilterTrajectory discrete_kalman_reference(const LinearSystem& system, const SampledPath& y, const Gaussian& init) {
  const Index dx = system.signal_dim();
  require(y.dim() == system.observation_dim(), ErrorKind::kDimensionMismatch, "observation dimension differs from d_Y");
  require(init.dim() == dx, ErrorKind::kDimensionMismatch, "initial law dimension differs from d_X");
  const Mat cross = system.b1 * system.big_b1.transpose() + system.b2 * system.big_b2.transpose();
  require(cross.cwiseAbs().maxCoeff() == 0.0, ErrorKind::kInvalidArgument,
          "discrete reference requires b∘B = 0");

  const double dt = y.dt();
  const Mat transition = Mat::Identity(dx, dx) + system.a1 * dt;
  const Mat process = (system.b1 * system.b1.transpose() + system.b2 * system.b2.transpose()) * dt;
  const Mat observe = system.big_a1 * dt;
  const Mat noise = (system.big_b1 * system.big_b1.transpose() + system.big_b2 * system.big_b2.transpose()) * dt;

  FilterTrajectory out;
  out.grid = y.grid();
  out.states.reserve(static_cast<std::size_t>(y.size()));
  out.states.push_back(init);
  Vec x = init.mean();
  Mat p = init.cov();
  for (Index k = 0; k < y.steps(); ++k) {
    const Vec z = (y.values().row(k + 1) - y.values().row(k)).transpose();
    const Mat s = observe * p * observe.transpose() + noise;
    Eigen::LLT<Mat> s_llt(s);
    if (s_llt.info() != Eigen::Success) {
      throw StepError(ErrorKind::kAssumptionViolation, k, "innovation covariance is not PD");
    }
    const Mat gain = s_llt.solve(observe * p).transpose();
    const Vec filtered = x + gain * (z - system.big_a0 * dt - observe * x);
    const Mat filtered_cov = p - gain * observe * p;
    x = transition * filtered + system.a0 * dt;
    p = transition * filtered_cov * transition.transpose() + process;
    p = 0.5 * (p + p.transpose());
    out.states.emplace_back(x, p);
  }
  return out;
}

Vec trajectory_w2_gaps(const FilterTrajectory& a, const FilterTrajectory& b) {
  require(a.size() == b.size(), ErrorKind::kDimensionMismatch, "trajectories have different lengths");
  Vec gaps(a.size());
  for (Index i = 0; i < a.size(); ++i) gaps[i] = w2(a.at(i), b.at(i));
  return gaps;
}

StabilityReport perturbation_stability(const CoefficientSet& coeffs, const SampledPath& y,
                                       const SampledPath& y_perturbed, const Gaussian& init) {
  require(y.same_grid(y_perturbed), ErrorKind::kDimensionMismatch, "perturbed path lives on a different grid");
  const FilterTrajectory base = run_oracle(coeffs, y, init);
  const FilterTrajectory moved = run_oracle(coeffs, y_perturbed, init);
  return {trajectory_w2_gaps(base, moved), sup_distance(y, y_perturbed)};
}

double time_lipschitz_estimate(const FilterTrajectory& trajectory) {
  double best = 0.0;
  for (Index i = 0; i + 1 < trajectory.size(); ++i) {
    const double dt = trajectory.grid[i + 1] - trajectory.grid[i];
    best = std::max(best, w2(trajectory.at(i + 1), trajectory.at(i)) / dt);
  }
  return best;
}

}  // namespace filterformer
