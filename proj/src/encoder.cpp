#include "filterformer/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "filterformer/error.hpp"

namespace filterformer {

void SimScoreParams::validate() const {
  require(!refs.empty(), ErrorKind::kInvalidArgument, "similarity score needs at least one reference path");
  require(B.rows() == b.size() && B.cols() == num_refs(), ErrorKind::kDimensionMismatch,
          "score matrix B must be hidden x refs");
  require(A.rows() == a.size() && A.cols() == b.size(), ErrorKind::kDimensionMismatch,
          "score matrix A must be scores x hidden");
  require(a.size() >= 1, ErrorKind::kDimensionMismatch, "score dimension must be positive");
  for (std::size_t i = 1; i < refs.size(); ++i) {
    require(refs[i].same_grid(refs[0]) && refs[i].dim() == refs[0].dim(), ErrorKind::kDimensionMismatch,
            "reference paths must share grid and dimension");
  }
}

void PosEncParams::validate() const {
  require(U.cols() == query_times.size(), ErrorKind::kDimensionMismatch, "U must have one column per query time");
  require(U.rows() == V.rows(), ErrorKind::kDimensionMismatch, "U and V must have the same number of rows");
  for (Index i = 1; i < query_times.size(); ++i) {
    require(query_times[i] > query_times[i - 1], ErrorKind::kInvalidArgument, "query times must be increasing");
  }
}

void AttentionParams::validate(Index path_dim) const {
  sim.validate();
  pos.validate();
  require(sim.score_dim() == pos.rows(), ErrorKind::kDimensionMismatch,
          "score dimension must equal the positional encoding rows");
  require(pos.V.cols() == path_dim, ErrorKind::kDimensionMismatch, "V must have d_Y columns");
  require(sim.refs.front().dim() == path_dim, ErrorKind::kDimensionMismatch, "reference paths must have d_Y columns");
  require(C.cols() == sim.score_dim() * path_dim, ErrorKind::kDimensionMismatch, "C must have s * d_Y columns");
}

Vec softmax(const Vec& v) {
  const Vec shifted = (v.array() - v.maxCoeff()).exp().matrix();
  return shifted / shifted.sum();
}

Vec softmax_right_inverse(const Vec& v) {
  require(v.size() >= 1 && (v.array() > 0.0).all(), ErrorKind::kInvalidArgument,
          "right-inverse needs a simplex-interior vector");
  const double last = std::log(v[v.size() - 1]);
  return (v.array().log() - last + 1.0).matrix();
}

Vec reference_distances(const SimScoreParams& p, const SampledPath& y, Index last_index) {
  Vec d(p.num_refs());
  for (Index n = 0; n < p.num_refs(); ++n) d[n] = sup_distance_until(y, p.refs[static_cast<std::size_t>(n)], last_index);
  return d;
}

Vec sim_logits(const SimScoreParams& p, const Vec& distances) {
  require(distances.size() == p.num_refs(), ErrorKind::kDimensionMismatch, "one distance per reference path");
  const Vec hidden = (p.B * distances + p.b).cwiseMax(0.0);
  return p.A * hidden + p.a;
}

Vec sim_score(const SimScoreParams& p, const SampledPath& y) {
  return softmax(sim_logits(p, reference_distances(p, y, y.size() - 1)));
}

Vec sim_score(const SimScoreParams& p, const SampledPath& y, double t) {
  require(t >= 0.0 && t <= y.horizon() * (1.0 + 1e-12), ErrorKind::kInvalidMaskTime, "mask time outside [0, T]");
  return softmax(sim_logits(p, reference_distances(p, y, y.index_of(t))));
}

namespace {

Mat pos_encoding_until(const PosEncParams& p, const SampledPath& y, Index last_index) {
  require(p.V.cols() == y.dim(), ErrorKind::kDimensionMismatch, "V must have d_Y columns");
  Mat samples(p.query_times.size(), y.dim());
  for (Index j = 0; j < p.query_times.size(); ++j) {
    samples.row(j) = y.values().row(std::min(y.index_of(p.query_times[j]), last_index));
  }
  return p.U * samples + p.V;
}

}  // namespace

Mat pos_encoding(const PosEncParams& p, const SampledPath& y) { return pos_encoding_until(p, y, y.size() - 1); }

Mat pos_encoding(const PosEncParams& p, const SampledPath& y, double t) {
  require(t >= 0.0 && t <= y.horizon() * (1.0 + 1e-12), ErrorKind::kInvalidMaskTime, "mask time outside [0, T]");
  return pos_encoding_until(p, y, y.index_of(t));
}

Vec attn(const AttentionParams& p, double t, const SampledPath& y) {
  require(t >= 0.0 && t <= y.horizon() * (1.0 + 1e-12), ErrorKind::kInvalidMaskTime, "mask time outside [0, T]");
  const Index k = y.index_of(t);
  const Vec score = softmax(sim_logits(p.sim, reference_distances(p.sim, y, k)));
  const Mat pos = pos_encoding_until(p.pos, y, k);
  require(score.size() == pos.rows(), ErrorKind::kDimensionMismatch, "score and positional rows differ");
  const Mat weighted = score.asDiagonal() * pos;
  const Vec flat = Eigen::Map<const Vec>(weighted.data(), weighted.size());
  require(p.C.cols() == flat.size(), ErrorKind::kDimensionMismatch, "C does not match vec(sim ⊙ pos)");
  Vec out(p.C.rows() + 1);
  out[0] = t;
  out.tail(p.C.rows()) = p.C * flat;
  return out;
}

AttentionParams build_pl_encoder(const PLDomainSpec& spec, const Vec& grid) {
  spec.validate();
  const Index pieces = spec.pieces();
  const Index dim = spec.dim;
  const SampledPath zero(grid, Mat::Zero(grid.size(), dim));
  for (Index i = 0; i < spec.knots.size(); ++i) {
    require(zero.on_grid(spec.knots[i]), ErrorKind::kOffGrid, "knot " + std::to_string(i) + " is not a grid point");
  }
  AttentionParams p;
  p.sim.refs = {zero};
  p.sim.B = Mat::Zero(pieces, 1);
  p.sim.b = Vec::Zero(pieces);
  p.sim.A = Mat::Zero(pieces, pieces);
  p.sim.a = Vec::Zero(pieces);
  // The knot t_0 = 0 is not sampled: every path in the domain starts at 0.
  p.pos.query_times = spec.knots.tail(pieces);
  p.pos.U = Mat::Identity(pieces, pieces);
  p.pos.V = Mat::Zero(pieces, dim);
  // Softmax of zero logits is uniform 1/s; scaling C by s restores the samples.
  p.C = static_cast<double>(pieces) * Mat::Identity(pieces * dim, pieces * dim);
  p.validate(dim);
  return p;
}

namespace {

Mat kuratowski_vectors(const std::vector<SampledPath>& paths) {
  const Index r = static_cast<Index>(paths.size());
  Mat u = Mat::Zero(r, r);
  for (Index i = 0; i < r; ++i)
    for (Index j = i + 1; j < r; ++j) {
      const double d = sup_distance(paths[static_cast<std::size_t>(i)], paths[static_cast<std::size_t>(j)]);
      u(i, j) = d;
      u(j, i) = d;
    }
  return u;  // column i is the Kuratowski vector of path i
}

}  // namespace

FiniteEncoder build_finite_encoder(const std::vector<SampledPath>& training_paths, Rng& rng, int max_attempts) {
  const Index r = static_cast<Index>(training_paths.size());
  require(r >= 2, ErrorKind::kInvalidArgument, "finite encoder needs at least two paths");
  require(max_attempts >= 1, ErrorKind::kInvalidArgument, "need at least one JL attempt");
  const SampledPath& first = training_paths.front();
  for (const auto& p : training_paths) {
    require(p.same_grid(first) && p.dim() == first.dim(), ErrorKind::kDimensionMismatch,
            "training paths must share grid and dimension");
  }
  const Mat kuratowski = kuratowski_vectors(training_paths);
  for (Index i = 0; i < r; ++i)
    for (Index j = i + 1; j < r; ++j)
      require(kuratowski(i, j) > 0.0, ErrorKind::kDuplicatePaths,
              "training paths " + std::to_string(i) + " and " + std::to_string(j) + " coincide");

  const Index k = static_cast<Index>(std::ceil(48.0 * std::log(static_cast<double>(r))));
  const Index s = k + 1;
  FiniteEncoder enc;
  enc.report.projection_dim = k;
  enc.report.lower_band = std::sqrt(0.5) - 0.05;
  enc.report.upper_band = std::sqrt(1.5 * static_cast<double>(r)) + 0.05;

  bool accepted = false;
  for (int attempt = 1; attempt <= max_attempts && !accepted; ++attempt) {
    const Mat projection = rng.normal_matrix(k, r) / std::sqrt(static_cast<double>(k));
    const Mat embedded = projection * kuratowski;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Index i = 0; i < r; ++i)
      for (Index j = i + 1; j < r; ++j) {
        const double ratio = (embedded.col(i) - embedded.col(j)).norm() / kuratowski(i, j);
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
    enc.report.attempts = attempt;
    enc.report.min_ratio = lo;
    enc.report.max_ratio = hi;
    if (lo >= enc.report.lower_band && hi <= enc.report.upper_band) {
      accepted = true;
      enc.projection = projection;
    }
  }
  if (!accepted) {
    throw Error(ErrorKind::kRetryBudgetExhausted,
                "no JL projection met the distortion band in " + std::to_string(max_attempts) + " draws");
  }

  AttentionParams& p = enc.params;
  p.sim.refs = training_paths;
  // ReLU identity block: (I; -I) then (I, -I) reproduces its input.
  Mat stack(2 * k, k);
  stack << Mat::Identity(k, k), -Mat::Identity(k, k);
  p.sim.B = stack * enc.projection;
  p.sim.b = Vec::Zero(2 * k);
  p.sim.A = Mat::Zero(s, 2 * k);
  p.sim.A.topLeftCorner(k, k) = Mat::Identity(k, k);
  p.sim.A.topRightCorner(k, k) = -Mat::Identity(k, k);
  p.sim.a = Vec::Zero(s);
  p.sim.a[k] = 1.0;
  // Positional term is the constant all-ones matrix.
  p.pos.query_times = Vec::Zero(0);
  p.pos.U = Mat::Zero(s, 0);
  p.pos.V = Mat::Ones(s, first.dim());
  // Select the first column of sim ⊙ pos, i.e. the score itself.
  p.C = Mat::Zero(s, s * first.dim());
  p.C.leftCols(s) = Mat::Identity(s, s);
  p.validate(first.dim());
  return enc;
}

Vec finite_embedding(const FiniteEncoder& encoder, const SampledPath& y) {
  const Vec logits = sim_logits(encoder.params.sim, reference_distances(encoder.params.sim, y, y.size() - 1));
  return logits.head(encoder.report.projection_dim);
}

}  // namespace filterformer
