#pragma once

#include <Eigen/Core>

#include "filterformer/rng.hpp"

namespace filterformer {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// A continuous path y: [0, T] -> R^dim sampled on a uniform grid.
///
/// Row i of `values()` is y(grid[i]). The grid starts at 0, ends at T and is
/// uniformly spaced to within 1e-12 T. Evaluation times used by the encoder
/// and the filters are grid points, so the discrete sup norm is exact for
/// paths that are piecewise linear with knots on the grid.
class SampledPath {
 public:
  SampledPath(Vec grid, Mat values);

  /// Uniform grid with `steps` intervals on [0, horizon].
  static Vec uniform_grid(double horizon, Index steps);
  static SampledPath constant(const Vec& grid, const Vec& value);

  const Vec& grid() const { return grid_; }
  const Mat& values() const { return values_; }
  Index size() const { return grid_.size(); }
  Index steps() const { return grid_.size() - 1; }
  Index dim() const { return values_.cols(); }
  double horizon() const { return grid_[grid_.size() - 1]; }
  double dt() const { return horizon() / static_cast<double>(steps()); }

  Vec at(Index i) const { return values_.row(i).transpose(); }

  /// Grid index of time t. Times within 1e-9 dt of a grid point snap to it;
  /// anything else throws kOffGrid.
  Index index_of(double t) const;
  bool on_grid(double t) const;

  /// Linear interpolation between grid points (reporting only).
  Vec interpolate(double t) const;

  bool same_grid(const SampledPath& other) const;

 private:
  Vec grid_;
  Mat values_;
};

/// max_i |y(t_i)|_2
double sup_norm(const SampledPath& p);

/// sup over [0, t] of |y|_2, t snapped to the grid.
double sup_norm_until(const SampledPath& p, double t);

/// sup_norm(p - q); both paths must share a grid.
double sup_distance(const SampledPath& p, const SampledPath& q);

/// sup over grid points in [0, grid[last_index]] of |p - q|_2.
double sup_distance_until(const SampledPath& p, const SampledPath& q, Index last_index);

SampledPath operator-(const SampledPath& p, const SampledPath& q);

/// The path restricted to [0, t] (t on the grid).
SampledPath restrict_to(const SampledPath& p, double t);

/// The path on [0, horizon] equal to p up to t and frozen at p(t) afterwards.
/// `horizon` must be a grid time of p with t <= horizon.
SampledPath horizontal_extension(const SampledPath& p, double t, double horizon);
inline SampledPath horizontal_extension(const SampledPath& p, double t) {
  return horizontal_extension(p, t, p.horizon());
}

/// Compact domain of piecewise-linear paths: y(0) = 0, linear between the
/// knots 0 = t_0 < ... < t_P = T, knot values in the closed ball of radius
/// `bound`.
struct PLDomainSpec {
  Vec knots;
  double bound = 1.0;
  Index dim = 1;

  void validate() const;
  Index pieces() const { return knots.size() - 1; }
};

/// Evenly spaced knots on [0, horizon].
PLDomainSpec uniform_pl_domain(double horizon, Index pieces, double bound, Index dim);

/// Draws knot values uniformly from the ball and interpolates on `grid`.
/// Every knot must be a grid point.
SampledPath sample_pl_path(const PLDomainSpec& spec, const Vec& grid, Rng& rng);

/// Builds the PL path through the given knot values (row i = value at
/// knot i; row 0 is expected to be zero but is not forced).
SampledPath pl_path_from_knots(const PLDomainSpec& spec, const Vec& grid, const Mat& knot_values);

}  // namespace filterformer
