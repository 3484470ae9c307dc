#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace filterformer {

/// Seedable source of uniform and Gaussian variates.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Distributions are implemented here rather than through
/// <random>'s distribution classes, whose algorithms are unspecified, so a
/// seed reproduces the same numbers across standard libraries:
///   uniform(): top 53 bits of one engine draw, in [0, 1);
///   normal():  polar-free Box–Muller, caching the second variate.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t next_u64() { return engine_(); }

  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  /// Uniform draw from the closed Euclidean ball of the given radius.
  Eigen::VectorXd uniform_ball(Eigen::Index dim, double radius);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent child seed; used to give each sample of a dataset
/// its own stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace filterformer
