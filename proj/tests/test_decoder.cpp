#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "filterformer/decoder.hpp"
#include "filterformer/error.hpp"

using namespace filterformer;

namespace {

// Exhaustive active-set solution of min |w - v|^2 over the simplex: on a
// support S the minimizer is v_S + theta with a common shift theta.
Vec brute_force_projection(const Vec& v) {
  const Index d = v.size();
  Vec best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << d); ++mask) {
    double sum = 0.0;
    int count = 0;
    for (Index i = 0; i < d; ++i)
      if (mask & (1u << i)) {
        sum += v[i];
        ++count;
      }
    const double theta = (1.0 - sum) / count;
    Vec w = Vec::Zero(d);
    bool feasible = true;
    for (Index i = 0; i < d; ++i)
      if (mask & (1u << i)) {
        w[i] = v[i] + theta;
        if (w[i] < 0.0) feasible = false;
      }
    if (!feasible) continue;
    const double cost = (w - v).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = w;
    }
  }
  return best;
}

GeoAttentionParams scalar_atoms(std::initializer_list<double> means, std::initializer_list<double> factors) {
  GeoAttentionParams p;
  for (double m : means) p.means.push_back(Vec::Constant(1, m));
  for (double a : factors) p.factors.push_back(Mat::Constant(1, 1, a));
  return p;
}

}  // namespace

TEST_CASE("simplex projection examples") {
  CHECK((project_simplex(Eigen::Vector2d(0.2, 0.8)) - Eigen::Vector2d(0.2, 0.8)).norm() < 1e-15);
  CHECK((project_simplex(Eigen::Vector2d(0.0, 0.0)) - Eigen::Vector2d(0.5, 0.5)).norm() < 1e-15);
  CHECK((project_simplex(Eigen::Vector2d(2.0, 0.0)) - Eigen::Vector2d(1.0, 0.0)).norm() < 1e-15);
}

TEST_CASE("simplex projection matches the active-set oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index d = 2 + static_cast<Index>(rng.next_u64() % 4);
    const Vec v = 2.0 * rng.normal_vector(d);
    const Vec w = project_simplex(v);
    CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
    CHECK(w.minCoeff() >= 0.0);
    CHECK((w - brute_force_projection(v)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("simplex projection is nonexpansive") {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index d = 2 + static_cast<Index>(rng.next_u64() % 30);
    const Vec u = rng.normal_vector(d), v = rng.normal_vector(d);
    CHECK((project_simplex(u) - project_simplex(v)).norm() <= (u - v).norm() + 1e-12);
  }
}

TEST_CASE("projection support and its pullback") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec v = rng.normal_vector(6);
    const SimplexProjection proj = project_simplex_with_support(v);
    CHECK((proj.weights - project_simplex(v)).norm() == 0.0);
    for (Index i = 0; i < 6; ++i) {
      const bool in_support = std::find(proj.support.begin(), proj.support.end(), i) != proj.support.end();
      CHECK(in_support == (proj.weights[i] > 0.0));
    }
    // Finite differences of <g, P(v)> away from support changes.
    const Vec g = rng.normal_vector(6);
    const Vec dir = rng.normal_vector(6);
    const double h = 1e-7;
    const SimplexProjection plus = project_simplex_with_support(v + h * dir);
    const SimplexProjection minus = project_simplex_with_support(v - h * dir);
    if (plus.support != proj.support || minus.support != proj.support) continue;
    const double fd = g.dot(plus.weights - minus.weights) / (2 * h);
    CHECK(simplex_vjp(proj, g).dot(dir) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("geometric attention examples") {
  SUBCASE("vertex") {
    GeoAttentionParams p = scalar_atoms({1.0, -2.0, 5.0}, {2.0, 1.0, 1.0});
    const Gaussian g = geo_attn(p, Eigen::Vector3d(10.0, 0.0, 0.0));
    CHECK(g.mean()[0] == 1.0);
    CHECK(g.cov()(0, 0) == 4.0);
  }
  SUBCASE("midpoint") {
    GeoAttentionParams p = scalar_atoms({0.0, 2.0}, {1.0, 1.0});
    const Gaussian g = geo_attn(p, Eigen::Vector2d(0.0, 0.0));
    CHECK(g.mean()[0] == 1.0);
    CHECK(g.cov()(0, 0) == 1.0);
  }
  SUBCASE("2-D Gram mixture") {
    GeoAttentionParams p;
    Mat a1(2, 2), a2(2, 2);
    a1 << 1, 2, 0, 1;
    a2 << 2, 0, 1, 1;
    p.means = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 3)};
    p.factors = {a1, a2};
    // w = (0.75, 0.25): P(0.25, -0.25).
    const Gaussian g = geo_attn(p, Eigen::Vector2d(0.25, -0.25));
    Mat expected(2, 2);
    // a1'a1 = [[1, 2], [2, 5]], a2'a2 = [[5, 1], [1, 1]]
    expected << 0.75 * 1 + 0.25 * 5, 0.75 * 2 + 0.25 * 1, 0.75 * 2 + 0.25 * 1, 0.75 * 5 + 0.25 * 1;
    CHECK((g.mean() - Eigen::Vector2d(0.75, 0.75)).norm() < 1e-14);
    CHECK((g.cov() - expected).norm() < 1e-14);
  }
}

TEST_CASE("decoder output is PSD and satisfies the mixing inequality") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.next_u64() % 6);
    const Index d = 1 + static_cast<Index>(rng.next_u64() % 3);
    GeoAttentionParams p = random_atoms(n, d, 1.0, 1.0, rng);
    // Rank-deficient atoms are legal.
    if (trial % 5 == 0) p.factors[0].row(0).setZero();
    const Vec v = rng.normal_vector(n);
    const Gaussian g = geo_attn(p, v);
    CHECK(min_eigenvalue(g.cov()) >= -1e-10);
    const Vec w = project_simplex(v);
    const ChartPoint mixed = chart(g);
    for (Index i = 0; i < n; ++i) {
      double bound = 0.0;
      for (Index k = 0; k < n; ++k) bound += w[k] * d2f(atom_chart(p, k), atom_chart(p, i));
      CHECK(d2f(mixed, atom_chart(p, i)) <= bound + 1e-12);
    }
  }
}

TEST_CASE("atom validation") {
  GeoAttentionParams p = scalar_atoms({0.0, 1.0}, {1.0});
  CHECK_THROWS_AS(p.validate(), Error);
  GeoAttentionParams empty;
  CHECK_THROWS_AS(empty.validate(), Error);
  GeoAttentionParams ok = scalar_atoms({0.0, 1.0}, {1.0, 2.0});
  CHECK_THROWS_AS(geo_attn(ok, Eigen::Vector3d(0, 0, 0)), Error);
}
