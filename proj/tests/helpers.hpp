#pragma once

#include <cmath>

#include "filterformer/gaussian.hpp"
#include "filterformer/paths.hpp"
#include "filterformer/rng.hpp"

namespace filterformer::testing {

inline Mat random_spd(Rng& rng, Index d, double floor = 0.1) {
  const Mat g = rng.normal_matrix(d, d);
  return g * g.transpose() + floor * Mat::Identity(d, d);
}

inline Gaussian random_gaussian(Rng& rng, Index d) { return Gaussian(rng.normal_vector(d), random_spd(rng, d)); }

/// Brownian-like path on a uniform grid.
inline SampledPath random_walk(Rng& rng, double horizon, Index steps, Index dim) {
  const Vec grid = SampledPath::uniform_grid(horizon, steps);
  Mat v = Mat::Zero(steps + 1, dim);
  const double s = std::sqrt(horizon / static_cast<double>(steps));
  for (Index i = 1; i <= steps; ++i) v.row(i) = v.row(i - 1) + s * rng.normal_vector(dim).transpose();
  return SampledPath(grid, v);
}

}  // namespace filterformer::testing
