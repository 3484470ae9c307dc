#include "filterformer/paths.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "filterformer/error.hpp"

namespace filterformer {
namespace {

// Row by row, so the result does not depend on how many rows follow.
double max_row_norm(const Mat& values, Index last_row) {
  double best = 0.0;
  for (Index i = 0; i <= last_row; ++i) best = std::max(best, values.row(i).squaredNorm());
  return std::sqrt(best);
}

}  // namespace

SampledPath::SampledPath(Vec grid, Mat values) : grid_(std::move(grid)), values_(std::move(values)) {
  require(grid_.size() >= 2, ErrorKind::kInvalidPath, "a path needs at least two grid points");
  require(values_.rows() == grid_.size(), ErrorKind::kInvalidPath,
          "values has " + std::to_string(values_.rows()) + " rows for " +
              std::to_string(grid_.size()) + " grid points");
  require(values_.cols() >= 1, ErrorKind::kInvalidPath, "path dimension must be positive");
  require(grid_[0] == 0.0, ErrorKind::kInvalidPath, "grid must start at 0");
  const double horizon = grid_[grid_.size() - 1];
  require(horizon > 0.0 && std::isfinite(horizon), ErrorKind::kInvalidPath, "horizon must be positive");
  const double h = horizon / static_cast<double>(grid_.size() - 1);
  for (Index i = 0; i < grid_.size(); ++i) {
    require(std::abs(grid_[i] - h * static_cast<double>(i)) <= 1e-12 * horizon, ErrorKind::kInvalidPath,
            "grid is not uniform at index " + std::to_string(i));
  }
  require(values_.allFinite(), ErrorKind::kInvalidPath, "path values must be finite");
}

Vec SampledPath::uniform_grid(double horizon, Index steps) {
  require(horizon > 0.0, ErrorKind::kInvalidArgument, "horizon must be positive");
  require(steps >= 1, ErrorKind::kInvalidArgument, "steps must be at least 1");
  Vec grid(steps + 1);
  for (Index i = 0; i <= steps; ++i) grid[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
  grid[steps] = horizon;
  return grid;
}

SampledPath SampledPath::constant(const Vec& grid, const Vec& value) {
  Mat values = value.transpose().replicate(grid.size(), 1);
  return SampledPath(grid, std::move(values));
}

bool SampledPath::on_grid(double t) const {
  const double pos = t / dt();
  const double nearest = std::round(pos);
  return std::abs(pos - nearest) <= 1e-9 && nearest >= 0.0 && nearest <= static_cast<double>(steps());
}

Index SampledPath::index_of(double t) const {
  require(std::isfinite(t), ErrorKind::kOffGrid, "time is not finite");
  const double pos = t / dt();
  const double nearest = std::round(pos);
  require(std::abs(pos - nearest) <= 1e-9, ErrorKind::kOffGrid, "time " + std::to_string(t) + " is not a grid point");
  require(nearest >= 0.0 && nearest <= static_cast<double>(steps()), ErrorKind::kOffGrid,
          "time " + std::to_string(t) + " is outside [0, T]");
  return static_cast<Index>(nearest);
}

Vec SampledPath::interpolate(double t) const {
  require(t >= 0.0 && t <= horizon() * (1.0 + 1e-12), ErrorKind::kOffGrid, "interpolation time outside [0, T]");
  const double pos = std::clamp(t / dt(), 0.0, static_cast<double>(steps()));
  const Index lo = std::min<Index>(static_cast<Index>(std::floor(pos)), steps() - 1);
  const double frac = pos - static_cast<double>(lo);
  return ((1.0 - frac) * values_.row(lo) + frac * values_.row(lo + 1)).transpose();
}

bool SampledPath::same_grid(const SampledPath& other) const {
  return size() == other.size() && std::abs(horizon() - other.horizon()) <= 1e-12 * horizon();
}

double sup_norm(const SampledPath& p) { return max_row_norm(p.values(), p.size() - 1); }

double sup_norm_until(const SampledPath& p, double t) {
  const Index k = p.index_of(t);
  return max_row_norm(p.values(), k);
}

double sup_distance_until(const SampledPath& p, const SampledPath& q, Index last_index) {
  require(p.same_grid(q), ErrorKind::kDimensionMismatch, "paths live on different grids");
  require(p.dim() == q.dim(), ErrorKind::kDimensionMismatch, "paths have different dimensions");
  require(last_index >= 0 && last_index < p.size(), ErrorKind::kInvalidArgument, "index outside the grid");
  double best = 0.0;
  for (Index i = 0; i <= last_index; ++i) {
    best = std::max(best, (p.values().row(i) - q.values().row(i)).squaredNorm());
  }
  return std::sqrt(best);
}

double sup_distance(const SampledPath& p, const SampledPath& q) {
  return sup_distance_until(p, q, p.size() - 1);
}

SampledPath operator-(const SampledPath& p, const SampledPath& q) {
  require(p.same_grid(q) && p.dim() == q.dim(), ErrorKind::kDimensionMismatch, "paths are not comparable");
  return SampledPath(p.grid(), p.values() - q.values());
}

SampledPath restrict_to(const SampledPath& p, double t) {
  const Index k = p.index_of(t);
  require(k >= 1, ErrorKind::kInvalidMaskTime, "restriction to [0, 0] is not a path");
  return SampledPath(p.grid().head(k + 1), p.values().topRows(k + 1));
}

SampledPath horizontal_extension(const SampledPath& p, double t, double horizon) {
  require(t <= horizon, ErrorKind::kInvalidMaskTime, "mask time exceeds the horizon");
  require(t >= 0.0, ErrorKind::kInvalidMaskTime, "mask time is negative");
  const Index n = p.index_of(horizon);
  require(n >= 1, ErrorKind::kInvalidArgument, "horizon must be positive");
  const Index k = p.index_of(t);
  Mat values = p.values().topRows(n + 1);
  for (Index i = k + 1; i <= n; ++i) values.row(i) = p.values().row(k);
  return SampledPath(p.grid().head(n + 1), std::move(values));
}

void PLDomainSpec::validate() const {
  require(knots.size() >= 2, ErrorKind::kInvalidArgument, "need at least two knots");
  require(knots[0] == 0.0, ErrorKind::kInvalidArgument, "first knot must be 0");
  for (Index i = 1; i < knots.size(); ++i)
    require(knots[i] > knots[i - 1], ErrorKind::kInvalidArgument, "knots must be strictly increasing");
  require(bound >= 0.0 && std::isfinite(bound), ErrorKind::kInvalidArgument, "bound must be nonnegative");
  require(dim >= 1, ErrorKind::kInvalidArgument, "dimension must be positive");
}

PLDomainSpec uniform_pl_domain(double horizon, Index pieces, double bound, Index dim) {
  require(pieces >= 1, ErrorKind::kInvalidArgument, "need at least one piece");
  PLDomainSpec spec;
  spec.knots = SampledPath::uniform_grid(horizon, pieces);
  spec.bound = bound;
  spec.dim = dim;
  return spec;
}

SampledPath pl_path_from_knots(const PLDomainSpec& spec, const Vec& grid, const Mat& knot_values) {
  spec.validate();
  require(knot_values.rows() == spec.knots.size() && knot_values.cols() == spec.dim,
          ErrorKind::kDimensionMismatch, "knot values do not match the domain");
  SampledPath probe(grid, Mat::Zero(grid.size(), spec.dim));
  require(std::abs(spec.knots[spec.knots.size() - 1] - probe.horizon()) <= 1e-12 * probe.horizon(),
          ErrorKind::kInvalidArgument, "last knot must equal the grid horizon");
  std::vector<Index> knot_index(static_cast<std::size_t>(spec.knots.size()));
  for (Index i = 0; i < spec.knots.size(); ++i) knot_index[static_cast<std::size_t>(i)] = probe.index_of(spec.knots[i]);

  Mat values(grid.size(), spec.dim);
  for (Index piece = 0; piece < spec.pieces(); ++piece) {
    const Index lo = knot_index[static_cast<std::size_t>(piece)];
    const Index hi = knot_index[static_cast<std::size_t>(piece + 1)];
    for (Index i = lo; i <= hi; ++i) {
      const double frac = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
      values.row(i) = (1.0 - frac) * knot_values.row(piece) + frac * knot_values.row(piece + 1);
    }
  }
  return SampledPath(grid, std::move(values));
}

SampledPath sample_pl_path(const PLDomainSpec& spec, const Vec& grid, Rng& rng) {
  spec.validate();
  Mat knot_values = Mat::Zero(spec.knots.size(), spec.dim);
  for (Index i = 1; i < spec.knots.size(); ++i) knot_values.row(i) = rng.uniform_ball(spec.dim, spec.bound).transpose();
  return pl_path_from_knots(spec, grid, knot_values);
}

}  // namespace filterformer
