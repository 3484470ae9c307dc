#pragma once

#include <Eigen/Core>

namespace filterformer {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// A Gaussian measure N(mean, cov) on R^d.
///
/// Construction symmetrizes `cov` and clamps eigenvalues in
/// [-1e-10 |cov|_F, 0) to zero. Larger asymmetry (relative Frobenius error
/// above 1e-10) or more negative eigenvalues throw kInvalidCovariance.
class Gaussian {
 public:
  Gaussian(Vec mean, Mat cov);

  const Vec& mean() const { return mean_; }
  const Mat& cov() const { return cov_; }
  Index dim() const { return mean_.size(); }

 private:
  Vec mean_;
  Mat cov_;
};

/// Image of a Gaussian in R^d x Sym_0(d), the (mean, covariance) chart.
struct ChartPoint {
  Vec mean;
  Mat cov;
};

ChartPoint chart(const Gaussian& g);
Gaussian unchart(const ChartPoint& p);

/// Symmetric square root via eigendecomposition, negative eigenvalues
/// clamped at 0.
Mat psd_sqrt(const Mat& m);

/// Closed-form 2-Wasserstein (Bures) distance between Gaussians.
double w2(const Gaussian& a, const Gaussian& b);

/// Product metric sqrt(|m1 - m2|^2 + |S1 - S2|_F^2) on the chart.
double d2f(const ChartPoint& a, const ChartPoint& b);
double d2f_squared(const ChartPoint& a, const ChartPoint& b);

/// Comparison constants between w2 and d2f on the set of Gaussians with
/// covariances S satisfying S >= r I and |S|_F <= R:
///   d2f / lower_divisor <= w2 <= upper_factor * d2f.
struct ChartComparison {
  double lower_divisor;
  double upper_factor;
};
ChartComparison chart_comparison(Index dim, double r, double big_r);

double min_eigenvalue(const Mat& sym);

}  // namespace filterformer
