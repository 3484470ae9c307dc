#pragma once

#include <vector>

#include "filterformer/gaussian.hpp"
#include "filterformer/rng.hpp"

namespace filterformer {

/// Gaussian atoms (m^(n), A^(n)); atom n stands for N(m^(n), A^(n)' A^(n)).
struct GeoAttentionParams {
  std::vector<Vec> means;
  std::vector<Mat> factors;

  Index num_atoms() const { return static_cast<Index>(means.size()); }
  Index dim() const { return means.empty() ? 0 : means.front().size(); }
  void validate() const;
};

/// Euclidean projection onto the probability simplex, by sorting:
/// rho = max{j : v_(j) + (1 - sum_{i<=j} v_(i)) / j > 0},
/// theta = (1 - sum_{i<=rho} v_(i)) / rho, w = max(v + theta, 0).
Vec project_simplex(const Vec& v);

/// Projection plus the support of the result, which determines the
/// derivative of the (piecewise affine) projection.
struct SimplexProjection {
  Vec weights;
  std::vector<Index> support;
  std::vector<double> scratch;
};
SimplexProjection project_simplex_with_support(const Vec& v);
/// Same, reusing the buffers of `out` (for tight training loops).
void project_simplex_into(const Eigen::Ref<const Vec>& v, SimplexProjection& out);

/// Pulls a gradient through the projection: on the support, subtract the
/// mean over the support; zero elsewhere.
Vec simplex_vjp(const SimplexProjection& proj, const Vec& upstream);

/// N(sum_n w_n m^(n), sum_n w_n A^(n)' A^(n)) with w = P(v).
Gaussian geo_attn(const GeoAttentionParams& p, const Vec& v);

/// Mixture in the (mean, covariance) chart for given simplex weights.
ChartPoint mix_atoms(const GeoAttentionParams& p, const Vec& weights);

ChartPoint atom_chart(const GeoAttentionParams& p, Index n);

/// Random atoms: means N(0, mean_scale^2 I), factors with N(0, factor_scale^2)
/// entries.
GeoAttentionParams random_atoms(Index num_atoms, Index dim, double mean_scale, double factor_scale, Rng& rng);

}  // namespace filterformer
