#include "filterformer/gaussian.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "filterformer/error.hpp"

namespace filterformer {
namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kEigenTol = 1e-10;

Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

void check_square(const Mat& m, const char* what) {
  require(m.rows() == m.cols(), ErrorKind::kDimensionMismatch, std::string(what) + " must be square");
}

}  // namespace

Gaussian::Gaussian(Vec mean, Mat cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  check_square(cov_, "covariance");
  require(cov_.rows() == mean_.size(), ErrorKind::kDimensionMismatch, "mean and covariance dimensions differ");
  require(mean_.allFinite() && cov_.allFinite(), ErrorKind::kInvalidCovariance, "non-finite Gaussian parameters");
  const double scale = cov_.norm();
  const double asym = (cov_ - cov_.transpose()).norm();
  require(asym <= kSymmetryTol * std::max(scale, 1e-300) || asym == 0.0, ErrorKind::kInvalidCovariance,
          "covariance is not symmetric");
  cov_ = symmetrized(cov_);
  if (cov_.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov_);
  const double lowest = eig.eigenvalues().minCoeff();
  require(lowest >= -kEigenTol * scale, ErrorKind::kInvalidCovariance,
          "covariance has eigenvalue " + std::to_string(lowest));
  if (lowest < 0.0) {
    const Vec clamped = eig.eigenvalues().cwiseMax(0.0);
    cov_ = symmetrized(eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose());
  }
}

ChartPoint chart(const Gaussian& g) { return {g.mean(), g.cov()}; }

Gaussian unchart(const ChartPoint& p) { return Gaussian(p.mean, p.cov); }

Mat psd_sqrt(const Mat& m) {
  check_square(m, "matrix");
  const double scale = m.norm();
  require((m - m.transpose()).norm() <= kSymmetryTol * std::max(scale, 1e-300), ErrorKind::kInvalidCovariance,
          "psd_sqrt of a non-symmetric matrix");
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Mat> eig(symmetrized(m));
  const Vec roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return symmetrized(eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose());
}

double w2(const Gaussian& a, const Gaussian& b) {
  require(a.dim() == b.dim(), ErrorKind::kDimensionMismatch, "w2 of Gaussians of different dimension");
  const double dm2 = (a.mean() - b.mean()).squaredNorm();
  if (a.dim() == 1) {
    const double ds = std::sqrt(a.cov()(0, 0)) - std::sqrt(b.cov()(0, 0));
    return std::sqrt(dm2 + ds * ds);
  }
  // tr A + tr B - 2 tr (B^1/2 A B^1/2)^1/2 = min over orthogonal U of
  // |A^1/2 - B^1/2 U|_F^2, attained at the polar factor of B^1/2 A^1/2.
  // Evaluating the norm directly avoids the cancellation of the trace form.
  const Mat root_a = psd_sqrt(a.cov());
  const Mat root_b = psd_sqrt(b.cov());
  const Eigen::JacobiSVD<Mat> svd(root_b * root_a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat u = svd.matrixU() * svd.matrixV().transpose();
  return std::sqrt(dm2 + (root_a - root_b * u).squaredNorm());
}

double d2f_squared(const ChartPoint& a, const ChartPoint& b) {
  require(a.mean.size() == b.mean.size() && a.cov.rows() == b.cov.rows() && a.cov.cols() == b.cov.cols(),
          ErrorKind::kDimensionMismatch, "d2f of chart points of different dimension");
  return (a.mean - b.mean).squaredNorm() + (a.cov - b.cov).squaredNorm();
}

double d2f(const ChartPoint& a, const ChartPoint& b) { return std::sqrt(d2f_squared(a, b)); }

ChartComparison chart_comparison(Index dim, double r, double big_r) {
  require(dim >= 1 && r > 0.0 && big_r > 0.0, ErrorKind::kInvalidArgument, "chart comparison needs d, r, R > 0");
  const double sqrt_d = std::sqrt(static_cast<double>(dim));
  return {std::max(1.0, sqrt_d * 2.0 * std::sqrt(big_r)), std::max(1.0, sqrt_d / (2.0 * std::sqrt(r)))};
}

double min_eigenvalue(const Mat& sym) {
  check_square(sym, "matrix");
  if (sym.size() == 0) return 0.0;
  if (sym.rows() == 1) return sym(0, 0);
  return Eigen::SelfAdjointEigenSolver<Mat>(symmetrized(sym), Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace filterformer
