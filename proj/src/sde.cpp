#include "filterformer/sde.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "filterformer/error.hpp"

namespace filterformer {
namespace {

void check_shape(const Mat& m, Index rows, Index cols, const char* name) {
  require(m.rows() == rows && m.cols() == cols, ErrorKind::kDimensionMismatch,
          std::string(name) + " has shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
              ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  require(m.allFinite(), ErrorKind::kAssumptionViolation, std::string(name) + " is not finite");
}

void check_entries(const Mat& m, double bound, const char* name) {
  if (!std::isfinite(bound)) return;
  require(m.cwiseAbs().maxCoeff() <= bound, ErrorKind::kAssumptionViolation,
          std::string(name) + " exceeds the entry bound");
}

template <typename F>
F constant_of(const Mat& value) {
  return [value](double, const ObservationPrefix&) { return value; };
}

VectorCoefficient constant_vector(const Vec& value) {
  return [value](double, const ObservationPrefix&) { return value; };
}

}  // namespace

CoefficientValues CoefficientSet::evaluate(double t, const ObservationPrefix& prefix) const {
  const Index dx = signal_dim;
  const Index dy = observation_dim;
  CoefficientValues v{a0(t, prefix),     a1(t, prefix),     b1(t, prefix),     b2(t, prefix),
                      big_a0(t, prefix), big_a1(t, prefix), big_b1(t, prefix), big_b2(t, prefix)};
  check_shape(v.a0, dx, 1, "a0");
  check_shape(v.a1, dx, dx, "a1");
  check_shape(v.b1, dx, dx, "b1");
  check_shape(v.b2, dx, dy, "b2");
  check_shape(v.big_a0, dy, 1, "A0");
  check_shape(v.big_a1, dy, dx, "A1");
  check_shape(v.big_b1, dy, dx, "B1");
  check_shape(v.big_b2, dy, dy, "B2");
  check_entries(v.a1, entry_bound, "a1");
  check_entries(v.big_a1, entry_bound, "A1");
  return v;
}

CoefficientSet LinearSystem::coefficients() const {
  CoefficientSet c;
  c.signal_dim = signal_dim();
  c.observation_dim = observation_dim();
  c.a0 = constant_vector(a0);
  c.a1 = constant_of<MatrixCoefficient>(a1);
  c.b1 = constant_of<MatrixCoefficient>(b1);
  c.b2 = constant_of<MatrixCoefficient>(b2);
  c.big_a0 = constant_vector(big_a0);
  c.big_a1 = constant_of<MatrixCoefficient>(big_a1);
  c.big_b1 = constant_of<MatrixCoefficient>(big_b1);
  c.big_b2 = constant_of<MatrixCoefficient>(big_b2);
  return c;
}

LinearSystem scalar_kalman(double a, double b, double big_a, double big_b) {
  LinearSystem s;
  s.a0 = Vec::Zero(1);
  s.a1 = Mat::Constant(1, 1, a);
  s.b1 = Mat::Constant(1, 1, b);
  s.b2 = Mat::Zero(1, 1);
  s.big_a0 = Vec::Zero(1);
  s.big_a1 = Mat::Constant(1, 1, big_a);
  s.big_b1 = Mat::Zero(1, 1);
  s.big_b2 = Mat::Constant(1, 1, big_b);
  return s;
}

double scalar_stationary_variance(double a, double b, double big_a, double big_b) {
  require(big_a != 0.0 && big_b != 0.0, ErrorKind::kInvalidArgument, "stationary variance needs A, B != 0");
  const double bb = big_b * big_b;
  return (a * bb + std::abs(big_b) * std::sqrt(a * a * bb + big_a * big_a * b * b)) / (big_a * big_a);
}

CoefficientSet observation_modulated(double rate, double swing, double b, double big_a, double big_b) {
  CoefficientSet c = scalar_kalman(-rate, b, big_a, big_b).coefficients();
  c.a1 = [rate, swing](double, const ObservationPrefix& y) {
    return Mat::Constant(1, 1, -(rate + swing * std::sin(y(y.rows() - 1, 0))));
  };
  c.entry_bound = std::abs(rate) + std::abs(swing) + std::abs(big_a);
  return c;
}

void SimConfig::validate() const {
  require(horizon > 0.0 && std::isfinite(horizon), ErrorKind::kInvalidArgument, "horizon must be positive");
  require(steps >= 1, ErrorKind::kInvalidArgument, "steps must be at least 1");
}

Vec sample_gaussian(const Gaussian& law, Rng& rng) {
  const Vec z = rng.normal_vector(law.dim());
  Eigen::LLT<Mat> llt(law.cov());
  if (llt.info() == Eigen::Success) return law.mean() + llt.matrixL() * z;
  return law.mean() + psd_sqrt(law.cov()) * z;
}

SimulatedPair simulate(const CoefficientSet& coeffs, const SimConfig& cfg) {
  cfg.validate();
  const Index dx = coeffs.signal_dim;
  const Index dy = coeffs.observation_dim;
  require(cfg.x0_law.dim() == dx, ErrorKind::kDimensionMismatch, "initial law dimension differs from d_X");
  const double sqrt_dt = std::sqrt(cfg.horizon / static_cast<double>(cfg.steps));

  // Draw order: X_0, then per step dW1 followed by dW2.
  Rng rng(cfg.seed);
  const Vec x0 = sample_gaussian(cfg.x0_law, rng);
  Mat dw1(cfg.steps, dx);
  Mat dw2(cfg.steps, dy);
  for (Index k = 0; k < cfg.steps; ++k) {
    dw1.row(k) = rng.normal_vector(dx).transpose() * sqrt_dt;
    dw2.row(k) = rng.normal_vector(dy).transpose() * sqrt_dt;
  }
  return simulate_driven(coeffs, cfg, x0, dw1, dw2);
}

SimulatedPair simulate_driven(const CoefficientSet& coeffs, const SimConfig& cfg, const Vec& x0, const Mat& dw1,
                              const Mat& dw2) {
  cfg.validate();
  const Index dx = coeffs.signal_dim;
  const Index dy = coeffs.observation_dim;
  require(x0.size() == dx, ErrorKind::kDimensionMismatch, "x0 dimension differs from d_X");
  require(cfg.y0.size() == dy, ErrorKind::kDimensionMismatch, "y0 dimension differs from d_Y");
  require(dw1.rows() == cfg.steps && dw1.cols() == dx && dw2.rows() == cfg.steps && dw2.cols() == dy,
          ErrorKind::kDimensionMismatch, "one increment row per step is required");

  const Vec grid = SampledPath::uniform_grid(cfg.horizon, cfg.steps);
  const double dt = cfg.horizon / static_cast<double>(cfg.steps);
  Mat xs(cfg.steps + 1, dx);
  Mat ys(cfg.steps + 1, dy);
  xs.row(0) = x0.transpose();
  ys.row(0) = cfg.y0.transpose();

  for (Index k = 0; k < cfg.steps; ++k) {
    const CoefficientValues c = coeffs.evaluate(grid[k], ys.topRows(k + 1));
    const Vec x = xs.row(k).transpose();
    const Vec w1 = dw1.row(k).transpose();
    const Vec w2 = dw2.row(k).transpose();
    xs.row(k + 1) = (x + (c.a0 + c.a1 * x) * dt + c.b1 * w1 + c.b2 * w2).transpose();
    ys.row(k + 1) = ys.row(k) + ((c.big_a0 + c.big_a1 * x) * dt + c.big_b1 * w1 + c.big_b2 * w2).transpose();
    if (!xs.row(k + 1).allFinite() || !ys.row(k + 1).allFinite()) {
      throw StepError(ErrorKind::kDivergence, k + 1, "state became non-finite");
    }
  }
  return {SampledPath(grid, std::move(xs)), SampledPath(grid, std::move(ys))};
}

}  // namespace filterformer
