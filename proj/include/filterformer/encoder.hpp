#pragma once

#include <vector>

#include "filterformer/paths.hpp"
#include "filterformer/rng.hpp"

namespace filterformer {

/// Similarity score parameters: reference paths y^(1..r) and a one-hidden
/// layer ReLU map
///   sim(y) = Softmax(A ReLU(B (|y - y^(n)|)_n + b) + a).
/// B is h x r, b has length h, A is s x h, a has length s. The hidden width
/// h is usually s; the finite-domain builder uses h = 2(s - 1).
struct SimScoreParams {
  std::vector<SampledPath> refs;
  Mat B;
  Vec b;
  Mat A;
  Vec a;

  Index num_refs() const { return static_cast<Index>(refs.size()); }
  Index score_dim() const { return a.size(); }
  Index hidden_dim() const { return b.size(); }
  void validate() const;
};

/// Positional encoding U (y(t_1) ⊕ ... ⊕ y(t_q)) + V, with U p x q and V
/// p x d_Y. Query times are grid points.
struct PosEncParams {
  Vec query_times;
  Mat U;
  Mat V;

  Index rows() const { return V.rows(); }
  void validate() const;
};

/// Pathwise attention parameters; C maps vec(sim ⊙ pos) to the encoding.
struct AttentionParams {
  SimScoreParams sim;
  PosEncParams pos;
  Mat C;

  Index encoding_dim() const { return C.rows(); }
  /// Length of attn's output, encoding_dim() + 1.
  Index output_dim() const { return C.rows() + 1; }
  void validate(Index path_dim) const;
};

Vec softmax(const Vec& v);

/// Right-inverse of Softmax onto the hyperplane {last coordinate = 1}:
/// R(v)_i = ln v_i - ln v_s + 1.
Vec softmax_right_inverse(const Vec& v);

/// Distances |y - y^(n)| over the grid prefix ending at `last_index`.
Vec reference_distances(const SimScoreParams& p, const SampledPath& y, Index last_index);

/// Score against full-horizon distances.
Vec sim_score(const SimScoreParams& p, const SampledPath& y);
/// Score with both y and the references frozen at t, i.e. distances in
/// the sup norm over [0, t].
Vec sim_score(const SimScoreParams& p, const SampledPath& y, double t);

/// Pre-softmax logits A ReLU(B u + b) + a for a distance vector u.
Vec sim_logits(const SimScoreParams& p, const Vec& distances);

/// U (stacked samples) + V, a p x d_Y matrix.
Mat pos_encoding(const PosEncParams& p, const SampledPath& y);
/// Same with y frozen at t: query times after t read y(t).
Mat pos_encoding(const PosEncParams& p, const SampledPath& y, double t);

/// (t, C vec(sim ⊙ pos)) evaluated on y frozen at t. vec stacks columns.
Vec attn(const AttentionParams& p, double t, const SampledPath& y);

/// Lossless encoder for the piecewise-linear domain: zero score parameters,
/// U samples the knots t_1..t_P, V = 0, C = s I so that
/// attn(t, y) = (t, vec(y(t_1), ..., y(t_P))) on every path.
AttentionParams build_pl_encoder(const PLDomainSpec& spec, const Vec& grid);

struct FiniteEncoderReport {
  Index projection_dim = 0;    ///< JL target dimension k = ceil(48 ln r)
  int attempts = 0;            ///< JL draws used
  double min_ratio = 0.0;      ///< min over pairs of |phi_i - phi_j| / |y_i - y_j|_T
  double max_ratio = 0.0;
  double lower_band = 0.0;     ///< 2^{-1/2} - 0.05
  double upper_band = 0.0;     ///< (3r/2)^{1/2} + 0.05
};

struct FiniteEncoder {
  AttentionParams params;
  Mat projection;  ///< the accepted k x r JL matrix
  FiniteEncoderReport report;
};

/// Lossless encoder for a finite set of paths: Kuratowski distances, a
/// Gaussian JL projection into k = ceil(48 ln r) dimensions passed through
/// a ReLU identity block, a constant last logit 1, and Softmax. A JL draw
/// is accepted only when the embedding's distortion over all training
/// pairs lies in the band of the report; at most `max_attempts` draws.
FiniteEncoder build_finite_encoder(const std::vector<SampledPath>& training_paths, Rng& rng, int max_attempts = 64);

/// The pre-softmax embedding phi(y) = JL(Kuratowski(y)), i.e. the first
/// k logits of the finite encoder's score.
Vec finite_embedding(const FiniteEncoder& encoder, const SampledPath& y);

}  // namespace filterformer
