#include "filterformer/decoder.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "filterformer/error.hpp"

namespace filterformer {

void GeoAttentionParams::validate() const {
  require(!means.empty(), ErrorKind::kInvalidArgument, "decoder needs at least one atom");
  require(means.size() == factors.size(), ErrorKind::kDimensionMismatch, "one factor per atom mean");
  const Index d = dim();
  for (std::size_t n = 0; n < means.size(); ++n) {
    require(means[n].size() == d && factors[n].rows() == d && factors[n].cols() == d, ErrorKind::kDimensionMismatch,
            "atom " + std::to_string(n) + " has inconsistent dimensions");
  }
}

void project_simplex_into(const Eigen::Ref<const Vec>& v, SimplexProjection& out) {
  const Index n = v.size();
  require(n >= 1, ErrorKind::kInvalidArgument, "cannot project an empty vector");
  require(v.allFinite(), ErrorKind::kInvalidArgument, "cannot project a non-finite vector");
  std::vector<double>& sorted = out.scratch;
  sorted.assign(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Index j = 0; j < n; ++j) {
    cumulative += sorted[static_cast<std::size_t>(j)];
    const double candidate = (1.0 - cumulative) / static_cast<double>(j + 1);
    if (sorted[static_cast<std::size_t>(j)] + candidate > 0.0) theta = candidate;
  }
  out.weights.resize(n);
  out.support.clear();
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double w = v[i] + theta;
    out.weights[i] = w > 0.0 ? w : 0.0;
    if (w > 0.0) {
      out.support.push_back(i);
      total += w;
    }
  }
  // Renormalize on the support to remove round-off in the sum.
  if (total > 0.0) out.weights /= total;
}

SimplexProjection project_simplex_with_support(const Vec& v) {
  SimplexProjection out;
  project_simplex_into(v, out);
  return out;
}

Vec project_simplex(const Vec& v) { return project_simplex_with_support(v).weights; }

Vec simplex_vjp(const SimplexProjection& proj, const Vec& upstream) {
  require(upstream.size() == proj.weights.size(), ErrorKind::kDimensionMismatch, "upstream has the wrong length");
  Vec out = Vec::Zero(upstream.size());
  if (proj.support.empty()) return out;
  double mean = 0.0;
  for (Index i : proj.support) mean += upstream[i];
  mean /= static_cast<double>(proj.support.size());
  for (Index i : proj.support) out[i] = upstream[i] - mean;
  return out;
}

ChartPoint atom_chart(const GeoAttentionParams& p, Index n) {
  const auto i = static_cast<std::size_t>(n);
  return {p.means[i], p.factors[i].transpose() * p.factors[i]};
}

ChartPoint mix_atoms(const GeoAttentionParams& p, const Vec& weights) {
  require(weights.size() == p.num_atoms(), ErrorKind::kDimensionMismatch, "one weight per atom");
  const Index d = p.dim();
  ChartPoint out{Vec::Zero(d), Mat::Zero(d, d)};
  for (Index n = 0; n < p.num_atoms(); ++n) {
    const double w = weights[n];
    if (w == 0.0) continue;
    const auto i = static_cast<std::size_t>(n);
    out.mean += w * p.means[i];
    out.cov.noalias() += w * (p.factors[i].transpose() * p.factors[i]);
  }
  return out;
}

Gaussian geo_attn(const GeoAttentionParams& p, const Vec& v) {
  require(v.size() == p.num_atoms(), ErrorKind::kDimensionMismatch, "decoder input length differs from atom count");
  return unchart(mix_atoms(p, project_simplex(v)));
}

GeoAttentionParams random_atoms(Index num_atoms, Index dim, double mean_scale, double factor_scale, Rng& rng) {
  GeoAttentionParams p;
  for (Index n = 0; n < num_atoms; ++n) {
    p.means.push_back(rng.normal_vector(dim) * mean_scale);
    p.factors.push_back(rng.normal_matrix(dim, dim) * factor_scale);
  }
  return p;
}

}  // namespace filterformer
