#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "filterformer/decoder.hpp"
#include "filterformer/encoder.hpp"
#include "filterformer/gaussian.hpp"
#include "filterformer/mlp.hpp"
#include "filterformer/oracle.hpp"

namespace filterformer {

/// geo_attn ∘ mlp ∘ attn. The encoder is frozen; MLP and atoms train.
struct FilterformerModel {
  AttentionParams encoder;
  MLPParams mlp;
  GeoAttentionParams decoder;

  void validate(Index path_dim) const;
};

Gaussian predict(const FilterformerModel& m, double t, const SampledPath& y);

/// One (t, y, target) triple; `path` indexes FilteringDataset::paths.
struct FilteringSample {
  Index path;
  Index time_index;
  Gaussian target;
};

struct FilteringDataset {
  std::vector<SampledPath> paths;
  std::vector<FilteringSample> samples;

  double time(const FilteringSample& s) const { return paths[static_cast<std::size_t>(s.path)].grid()[s.time_index]; }
  Index size() const { return static_cast<Index>(samples.size()); }
};

/// Every grid time of every path, with the oracle trajectory as target.
FilteringDataset make_dataset(std::vector<SampledPath> paths, const std::vector<FilterTrajectory>& targets);

/// Encoder outputs for every sample, one column each.
Mat encode_dataset(const AttentionParams& encoder, const FilteringDataset& data);

struct ModelGradient {
  MLPGradient mlp;
  std::vector<Vec> means;
  std::vector<Mat> factors;
};

/// Mean over the samples of d2f(chart(prediction), chart(target))^2, and
/// its gradient with respect to the MLP parameters and the atoms.
/// `features` are the precomputed encodings of `sample_ids`.
struct LossResult {
  double loss = 0.0;
  ModelGradient grad;
};
LossResult loss_and_gradient(const FilterformerModel& m, const FilteringDataset& data, const Mat& features,
                             const std::vector<Index>& sample_ids);

double loss(const FilterformerModel& m, const FilteringDataset& data);

/// Trainable parameters (MLP layers, then atom means and factors) as one
/// flat vector, and back.
Vec pack_parameters(const FilterformerModel& m);
void unpack_parameters(const Vec& flat, FilterformerModel& m);
Vec pack_gradient(const ModelGradient& g);

enum class Optimizer { kGradientDescent, kMomentum, kAdam };
std::string_view to_string(Optimizer o);
Optimizer optimizer_from_string(std::string_view name);

struct TrainConfig {
  double learning_rate = 1e-2;
  /// Multiplier applied to the learning rate, reached linearly-in-log at the
  /// last epoch (1 keeps it constant).
  double final_lr_fraction = 1.0;
  int epochs = 1000;
  Index batch_size = 0;  ///< 0 means full batch
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kGradientDescent;
  double momentum = 0.9;
  /// Training stops once the loss falls below this value.
  double loss_tolerance = 0.0;

  void validate() const;
};

struct TrainResult {
  FilterformerModel model;
  std::vector<double> history;  ///< loss before each epoch's update, then the final loss
};

/// Deterministic given cfg.seed. Throws kDivergence (with the epoch) when
/// the loss becomes non-finite.
TrainResult train(const FilterformerModel& m, const FilteringDataset& data, const TrainConfig& cfg);

struct EvaluationRow {
  Index sample;
  Index path;
  double t;
  double w2;
};

struct Evaluation {
  double sup_w2 = 0.0;
  double mean_w2 = 0.0;
  std::vector<EvaluationRow> rows;
};

/// W2(predict(t, y), target) for every sample. W2 bounds W_p for p <= 2,
/// so sup_w2 also bounds the uniform W_p error.
Evaluation evaluate(const FilterformerModel& m, const FilteringDataset& data);

/// Model with a freshly initialized MLP (input normalization fitted to the
/// dataset encodings) and atoms copied from dataset targets (mean, Cholesky
/// factor) chosen by farthest-point sampling in the chart metric.
FilterformerModel init_model(const AttentionParams& encoder, const FilteringDataset& data,
                             const std::vector<Index>& hidden, Index num_atoms, Activation activation, Rng& rng);

}  // namespace filterformer
