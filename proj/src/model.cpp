#include "filterformer/model.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "filterformer/error.hpp"

namespace filterformer {

void FilterformerModel::validate(Index path_dim) const {
  encoder.validate(path_dim);
  mlp.validate();
  decoder.validate();
  require(mlp.input_dim() == encoder.output_dim(), ErrorKind::kDimensionMismatch,
          "MLP input width differs from the encoding length");
  require(mlp.output_dim() == decoder.num_atoms(), ErrorKind::kDimensionMismatch,
          "MLP output width differs from the number of atoms");
}

Gaussian predict(const FilterformerModel& m, double t, const SampledPath& y) {
  return geo_attn(m.decoder, forward(m.mlp, attn(m.encoder, t, y)));
}

FilteringDataset make_dataset(std::vector<SampledPath> paths, const std::vector<FilterTrajectory>& targets) {
  require(paths.size() == targets.size(), ErrorKind::kDimensionMismatch, "one target trajectory per path");
  FilteringDataset data;
  data.paths = std::move(paths);
  for (std::size_t p = 0; p < data.paths.size(); ++p) {
    require(targets[p].size() == data.paths[p].size(), ErrorKind::kDimensionMismatch,
            "trajectory " + std::to_string(p) + " does not match its path grid");
    for (Index i = 0; i < targets[p].size(); ++i) {
      data.samples.push_back({static_cast<Index>(p), i, targets[p].at(i)});
    }
  }
  return data;
}

Mat encode_dataset(const AttentionParams& encoder, const FilteringDataset& data) {
  Mat features(encoder.output_dim(), data.size());
  for (Index i = 0; i < data.size(); ++i) {
    const FilteringSample& s = data.samples[static_cast<std::size_t>(i)];
    features.col(i) = attn(encoder, data.time(s), data.paths[static_cast<std::size_t>(s.path)]);
  }
  return features;
}

LossResult loss_and_gradient(const FilterformerModel& m, const FilteringDataset& data, const Mat& features,
                             const std::vector<Index>& sample_ids) {
  require(!sample_ids.empty(), ErrorKind::kInvalidArgument, "loss of an empty batch");
  require(features.cols() == static_cast<Index>(sample_ids.size()), ErrorKind::kDimensionMismatch,
          "one feature column per sample");
  const Index n_atoms = m.decoder.num_atoms();
  const double inv_n = 1.0 / static_cast<double>(sample_ids.size());

  std::vector<Mat> grams;
  grams.reserve(static_cast<std::size_t>(n_atoms));
  for (Index n = 0; n < n_atoms; ++n) grams.push_back(atom_chart(m.decoder, n).cov);

  MLPTape tape;
  const Mat logits = forward_batch(m.mlp, features, &tape);

  LossResult out;
  out.grad.means.assign(static_cast<std::size_t>(n_atoms), Vec::Zero(m.decoder.dim()));
  out.grad.factors.assign(static_cast<std::size_t>(n_atoms), Mat::Zero(m.decoder.dim(), m.decoder.dim()));
  Mat upstream = Mat::Zero(logits.rows(), logits.cols());

  // Raw loops: d_X is tiny and this runs once per sample per step.
  const Index d = m.decoder.dim();
  const Index dd = d * d;
  SimplexProjection proj;
  Vec pred_mean(d), g_mean(d);
  Mat pred_cov(d, d), g_cov(d, d);
  Vec g_weights = Vec::Zero(n_atoms);
  for (std::size_t i = 0; i < sample_ids.size(); ++i) {
    const FilteringSample& s = data.samples[static_cast<std::size_t>(sample_ids[i])];
    project_simplex_into(logits.col(static_cast<Index>(i)), proj);
    pred_mean.setZero();
    pred_cov.setZero();
    for (Index n : proj.support) {
      const auto k = static_cast<std::size_t>(n);
      const double w = proj.weights[n];
      const double* mean = m.decoder.means[k].data();
      const double* gram = grams[k].data();
      for (Index r = 0; r < d; ++r) pred_mean[r] += w * mean[r];
      for (Index r = 0; r < dd; ++r) pred_cov.data()[r] += w * gram[r];
    }
    double sample_loss = 0.0;
    for (Index r = 0; r < d; ++r) {
      const double diff = pred_mean[r] - s.target.mean()[r];
      sample_loss += diff * diff;
      g_mean[r] = 2.0 * inv_n * diff;
    }
    for (Index r = 0; r < dd; ++r) {
      const double diff = pred_cov.data()[r] - s.target.cov().data()[r];
      sample_loss += diff * diff;
      g_cov.data()[r] = 2.0 * inv_n * diff;
    }
    out.loss += sample_loss * inv_n;

    double support_mean = 0.0;
    for (Index n : proj.support) {
      const auto k = static_cast<std::size_t>(n);
      const double w = proj.weights[n];
      const double* mean = m.decoder.means[k].data();
      const double* gram = grams[k].data();
      double gw = 0.0;
      for (Index r = 0; r < d; ++r) gw += g_mean[r] * mean[r];
      for (Index r = 0; r < dd; ++r) gw += g_cov.data()[r] * gram[r];
      g_weights[n] = gw;
      support_mean += gw;
      double* grad_mean = out.grad.means[k].data();
      for (Index r = 0; r < d; ++r) grad_mean[r] += w * g_mean[r];
      if (d == 1) {
        out.grad.factors[k](0, 0) += 2.0 * w * m.decoder.factors[k](0, 0) * g_cov(0, 0);
      } else {
        out.grad.factors[k].noalias() += (2.0 * w) * m.decoder.factors[k] * g_cov;
      }
    }
    // Pull back through the projection: centre on the support, zero elsewhere.
    support_mean /= static_cast<double>(proj.support.size());
    for (Index n : proj.support) upstream(n, static_cast<Index>(i)) = g_weights[n] - support_mean;
  }
  out.grad.mlp = backward_batch(m.mlp, tape, upstream);
  return out;
}

double loss(const FilterformerModel& m, const FilteringDataset& data) {
  std::vector<Index> ids(static_cast<std::size_t>(data.size()));
  std::iota(ids.begin(), ids.end(), Index{0});
  return loss_and_gradient(m, data, encode_dataset(m.encoder, data), ids).loss;
}

Vec pack_parameters(const FilterformerModel& m) {
  Index n = m.mlp.parameter_count();
  for (Index a = 0; a < m.decoder.num_atoms(); ++a) {
    n += m.decoder.means[static_cast<std::size_t>(a)].size() + m.decoder.factors[static_cast<std::size_t>(a)].size();
  }
  Vec flat(n);
  Index at = 0;
  auto put = [&](const auto& block) {
    flat.segment(at, block.size()) = Eigen::Map<const Vec>(block.data(), block.size());
    at += block.size();
  };
  for (const auto& layer : m.mlp.layers) {
    put(layer.weight);
    put(layer.bias);
  }
  for (const auto& mean : m.decoder.means) put(mean);
  for (const auto& factor : m.decoder.factors) put(factor);
  return flat;
}

void unpack_parameters(const Vec& flat, FilterformerModel& m) {
  Index at = 0;
  auto take = [&](auto& block) {
    require(at + block.size() <= flat.size(), ErrorKind::kDimensionMismatch, "flat parameter vector too short");
    Eigen::Map<Vec>(block.data(), block.size()) = flat.segment(at, block.size());
    at += block.size();
  };
  for (auto& layer : m.mlp.layers) {
    take(layer.weight);
    take(layer.bias);
  }
  for (auto& mean : m.decoder.means) take(mean);
  for (auto& factor : m.decoder.factors) take(factor);
  require(at == flat.size(), ErrorKind::kDimensionMismatch, "flat parameter vector too long");
}

Vec pack_gradient(const ModelGradient& g) {
  FilterformerModel shadow;
  for (const auto& layer : g.mlp.layers) shadow.mlp.layers.push_back(layer);
  shadow.decoder.means = g.means;
  shadow.decoder.factors = g.factors;
  return pack_parameters(shadow);
}

std::string_view to_string(Optimizer o) {
  switch (o) {
    case Optimizer::kGradientDescent: return "gd";
    case Optimizer::kMomentum: return "momentum";
    case Optimizer::kAdam: return "adam";
  }
  return "gd";
}

Optimizer optimizer_from_string(std::string_view name) {
  if (name == "gd") return Optimizer::kGradientDescent;
  if (name == "momentum") return Optimizer::kMomentum;
  if (name == "adam") return Optimizer::kAdam;
  throw Error(ErrorKind::kConfig, "unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), ErrorKind::kConfig, "learning rate must be >= 0");
  require(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0, ErrorKind::kConfig,
          "final_lr_fraction must lie in (0, 1]");
  require(epochs >= 0, ErrorKind::kConfig, "epochs must be >= 0");
  require(batch_size >= 0, ErrorKind::kConfig, "batch size must be >= 0");
  require(momentum >= 0.0 && momentum < 1.0, ErrorKind::kConfig, "momentum must lie in [0, 1)");
  require(loss_tolerance >= 0.0, ErrorKind::kConfig, "loss tolerance must be >= 0");
}

namespace {

class Stepper {
 public:
  Stepper(Optimizer kind, double momentum, Index n)
      : kind_(kind), momentum_(momentum), first_(Vec::Zero(n)), second_(Vec::Zero(n)) {}

  void step(Vec& params, const Vec& grad, double lr) {
    switch (kind_) {
      case Optimizer::kGradientDescent:
        params -= lr * grad;
        break;
      case Optimizer::kMomentum:
        first_ = momentum_ * first_ + grad;
        params -= lr * first_;
        break;
      case Optimizer::kAdam: {
        constexpr double kBeta1 = 0.9;
        constexpr double kBeta2 = 0.999;
        constexpr double kEps = 1e-8;
        ++t_;
        first_ = kBeta1 * first_ + (1.0 - kBeta1) * grad;
        second_ = kBeta2 * second_ + (1.0 - kBeta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(kBeta1, t_);
        const double c2 = 1.0 - std::pow(kBeta2, t_);
        params.array() -= lr * (first_.array() / c1) / ((second_.array() / c2).sqrt() + kEps);
        break;
      }
    }
  }

 private:
  Optimizer kind_;
  double momentum_;
  Vec first_;
  Vec second_;
  double t_ = 0.0;
};

}  // namespace

TrainResult train(const FilterformerModel& m, const FilteringDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  require(data.size() > 0, ErrorKind::kInvalidArgument, "training on an empty dataset");
  m.validate(data.paths.front().dim());

  const Mat features = encode_dataset(m.encoder, data);
  std::vector<Index> all(static_cast<std::size_t>(data.size()));
  std::iota(all.begin(), all.end(), Index{0});
  const bool full_batch = cfg.batch_size == 0 || cfg.batch_size >= data.size();

  TrainResult result{m, {}};
  Vec params = pack_parameters(m);
  Vec best_params = params;
  double best_loss = std::numeric_limits<double>::infinity();
  Stepper stepper(cfg.optimizer, cfg.momentum, params.size());
  Rng rng(cfg.seed);

  auto full_loss = [&](const FilterformerModel& model) { return loss_and_gradient(model, data, features, all); };
  auto record = [&](double value, int epoch) {
    if (!std::isfinite(value)) throw Error(ErrorKind::kDivergence, "loss is not finite at epoch " + std::to_string(epoch));
    result.history.push_back(value);
    if (value < best_loss) {
      best_loss = value;
      best_params = params;
    }
  };

  FilterformerModel& model = result.model;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double progress = cfg.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1) : 0.0;
    const double lr = cfg.learning_rate * std::pow(cfg.final_lr_fraction, progress);
    if (full_batch) {
      const LossResult lr_result = full_loss(model);
      record(lr_result.loss, epoch);
      if (lr_result.loss < cfg.loss_tolerance) break;
      stepper.step(params, pack_gradient(lr_result.grad), lr);
      unpack_parameters(params, model);
      continue;
    }
    std::vector<Index> order = all;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next_u64() % i)]);
    }
    const double epoch_loss = full_loss(model).loss;
    record(epoch_loss, epoch);
    if (epoch_loss < cfg.loss_tolerance) break;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Index> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                               order.begin() + static_cast<std::ptrdiff_t>(stop));
      Mat batch_features(features.rows(), static_cast<Index>(batch.size()));
      for (std::size_t j = 0; j < batch.size(); ++j) batch_features.col(static_cast<Index>(j)) = features.col(batch[j]);
      stepper.step(params, pack_gradient(loss_and_gradient(model, data, batch_features, batch).grad), lr);
      unpack_parameters(params, model);
    }
  }
  record(full_loss(model).loss, cfg.epochs);
  unpack_parameters(best_params, model);
  return result;
}

Evaluation evaluate(const FilterformerModel& m, const FilteringDataset& data) {
  Evaluation out;
  if (data.size() == 0) return out;
  const Mat logits = forward_batch(m.mlp, encode_dataset(m.encoder, data));
  out.rows.reserve(static_cast<std::size_t>(data.size()));
  double total = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    const FilteringSample& s = data.samples[static_cast<std::size_t>(i)];
    const double gap = w2(geo_attn(m.decoder, logits.col(i)), s.target);
    out.rows.push_back({i, s.path, data.time(s), gap});
    out.sup_w2 = std::max(out.sup_w2, gap);
    total += gap;
  }
  out.mean_w2 = total / static_cast<double>(data.size());
  return out;
}

FilterformerModel init_model(const AttentionParams& encoder, const FilteringDataset& data,
                             const std::vector<Index>& hidden, Index num_atoms, Activation activation, Rng& rng) {
  require(data.size() > 0, ErrorKind::kInvalidArgument, "atom initialization needs targets");
  require(num_atoms >= 1, ErrorKind::kInvalidArgument, "need at least one atom");
  FilterformerModel m;
  m.encoder = encoder;
  m.mlp = init_mlp(encoder.output_dim(), hidden, num_atoms, activation, rng);
  fit_input_normalization(m.mlp, encode_dataset(encoder, data));
  // Farthest-point sampling in the chart: the first atom is a random
  // target, each next one the target farthest from those already chosen,
  // so the atoms' hull reaches the extreme targets from the start.
  const auto n_targets = static_cast<std::size_t>(data.size());
  std::vector<ChartPoint> charts;
  charts.reserve(n_targets);
  for (const auto& s : data.samples) charts.push_back(chart(s.target));
  std::vector<double> gap(n_targets, std::numeric_limits<double>::infinity());
  auto pick = static_cast<std::size_t>(rng.next_u64() % n_targets);
  for (Index n = 0; n < num_atoms; ++n) {
    const Gaussian& target = data.samples[pick].target;
    m.decoder.means.push_back(target.mean());
    Eigen::LLT<Mat> llt(target.cov());
    const Mat factor = llt.info() == Eigen::Success ? Mat(llt.matrixL().transpose()) : psd_sqrt(target.cov());
    m.decoder.factors.push_back(factor);
    std::size_t next = 0;
    for (std::size_t i = 0; i < n_targets; ++i) {
      const double d = (charts[i].mean - charts[pick].mean).squaredNorm() + (charts[i].cov - charts[pick].cov).squaredNorm();
      gap[i] = std::min(gap[i], d);
      if (gap[i] > gap[next]) next = i;
    }
    pick = next;
  }
  return m;
}

}  // namespace filterformer
