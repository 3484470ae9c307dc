#include "doctest.h"
#include "helpers.hpp"

#include "filterformer/error.hpp"
#include "filterformer/paths.hpp"

using namespace filterformer;
using filterformer::testing::random_walk;

namespace {

SampledPath scalar_path(std::initializer_list<double> ys, double horizon = 1.0) {
  const Index steps = static_cast<Index>(ys.size()) - 1;
  Mat v(steps + 1, 1);
  Index i = 0;
  for (double y : ys) v(i++, 0) = y;
  return SampledPath(SampledPath::uniform_grid(horizon, steps), v);
}

}  // namespace

TEST_CASE("sup norm of simple paths") {
  const Vec grid = SampledPath::uniform_grid(1.0, 4);
  CHECK(sup_norm(SampledPath::constant(grid, Eigen::Vector2d(3.0, 4.0))) == doctest::Approx(5.0));
  CHECK(sup_norm(SampledPath::constant(grid, Vec::Zero(2))) == 0.0);
  CHECK(sup_norm(scalar_path({0.0, -1.0, -2.0})) == doctest::Approx(2.0));
}

TEST_CASE("construction rejects bad grids and values") {
  CHECK_THROWS_AS(SampledPath(Vec::Zero(1), Mat::Zero(1, 1)), Error);
  Vec g(3);
  g << 0.1, 0.5, 1.0;
  CHECK_THROWS_AS(SampledPath(g, Mat::Zero(3, 1)), Error);
  g << 0.0, 0.3, 1.0;
  CHECK_THROWS_AS(SampledPath(g, Mat::Zero(3, 1)), Error);
  Mat v = Mat::Zero(3, 1);
  v(1, 0) = std::nan("");
  CHECK_THROWS_AS(SampledPath(SampledPath::uniform_grid(1.0, 2), v), Error);
  CHECK_THROWS_AS(SampledPath(SampledPath::uniform_grid(1.0, 2), Mat::Zero(4, 1)), Error);
}

TEST_CASE("grid lookup snaps near-grid times and rejects the rest") {
  const SampledPath p = scalar_path({0.0, 1.0, 2.0, 3.0});
  CHECK(p.index_of(1.0 / 3.0) == 1);
  CHECK(p.index_of(2.0 / 3.0 + 1e-13) == 2);
  try {
    (void)p.index_of(0.5);
    FAIL("expected off-grid");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kOffGrid);
  }
  CHECK(p.interpolate(0.5)[0] == doctest::Approx(1.5));
}

TEST_CASE("horizontal extension") {
  const SampledPath p = scalar_path({0.0, 1.0, 2.0});
  SUBCASE("t = T is the identity") {
    const SampledPath e = horizontal_extension(p, 1.0);
    CHECK(e.values() == p.values());
  }
  SUBCASE("freeze rule") {
    const SampledPath e = horizontal_extension(p, 0.5);
    CHECK(e.values()(0, 0) == 0.0);
    CHECK(e.values()(1, 0) == 1.0);
    CHECK(e.values()(2, 0) == 1.0);
  }
  SUBCASE("t beyond the horizon") {
    try {
      (void)horizontal_extension(p, 1.0, 0.5);
      FAIL("expected invalid mask time");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kInvalidMaskTime);
    }
  }
}

TEST_CASE("extension is an isometry and restriction is nonexpansive") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const SampledPath p = random_walk(rng, 2.0, 40, 2);
    const double t = p.grid()[1 + static_cast<Index>(rng.next_u64() % 40)];
    const double ext = sup_norm(horizontal_extension(p, t));
    const double res = sup_norm(restrict_to(p, t));
    CHECK(ext == res);
    CHECK(sup_norm_until(p, t) == res);
    CHECK(res <= sup_norm(p));
  }
}

TEST_CASE("sup distance is a metric on equal-grid paths") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const SampledPath p = random_walk(rng, 1.0, 30, 3);
    const SampledPath q = random_walk(rng, 1.0, 30, 3);
    const SampledPath r = random_walk(rng, 1.0, 30, 3);
    CHECK(sup_distance(p, p) == 0.0);
    CHECK(sup_distance(p, q) > 0.0);
    CHECK(sup_distance(p, q) == sup_distance(q, p));
    CHECK(sup_distance(p, r) <= sup_distance(p, q) + sup_distance(q, r) + 1e-12);
  }
}

TEST_CASE("prefix distance only sees the prefix") {
  const SampledPath p = scalar_path({0.0, 1.0, 5.0});
  const SampledPath q = scalar_path({0.0, 2.0, -5.0});
  CHECK(sup_distance_until(p, q, 1) == doctest::Approx(1.0));
  CHECK(sup_distance_until(p, q, 2) == doctest::Approx(10.0));
}

TEST_CASE("piecewise-linear domain sampling") {
  const Vec grid = SampledPath::uniform_grid(1.0, 64);
  SUBCASE("bound 0 gives the zero path") {
    Rng rng(1);
    const SampledPath p = sample_pl_path(uniform_pl_domain(1.0, 4, 0.0, 2), grid, rng);
    CHECK(sup_norm(p) == 0.0);
  }
  SUBCASE("starts at 0, knots in the ball, linear in between") {
    const PLDomainSpec spec = uniform_pl_domain(1.0, 4, 1.5, 2);
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      const SampledPath p = sample_pl_path(spec, grid, rng);
      CHECK(p.at(0).norm() == 0.0);
      for (Index k = 0; k < spec.knots.size(); ++k) CHECK(p.at(p.index_of(spec.knots[k])).norm() <= 1.5 + 1e-12);
      // Midpoint of each piece is the average of its end knots.
      for (Index k = 0; k + 1 < spec.knots.size(); ++k) {
        const Index i0 = p.index_of(spec.knots[k]);
        const Index i1 = p.index_of(spec.knots[k + 1]);
        CHECK((p.at((i0 + i1) / 2) - 0.5 * (p.at(i0) + p.at(i1))).norm() < 1e-12);
      }
      // PL with knots on the grid: the grid sup norm is the knot maximum.
      double knot_max = 0.0;
      for (Index k = 0; k < spec.knots.size(); ++k) knot_max = std::max(knot_max, p.at(p.index_of(spec.knots[k])).norm());
      CHECK(sup_norm(p) == doctest::Approx(knot_max).epsilon(1e-12));
    }
  }
  SUBCASE("seed replay is deterministic") {
    const PLDomainSpec spec = uniform_pl_domain(1.0, 8, 1.0, 1);
    Rng a(42), b(42);
    CHECK(sample_pl_path(spec, grid, a).values() == sample_pl_path(spec, grid, b).values());
  }
  SUBCASE("knots must be on the grid") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_pl_path(uniform_pl_domain(1.0, 3, 1.0, 1), grid, rng), Error);
  }
}
