#include "filterformer/mlp.hpp"

#include <cmath>
#include <string>

#include "filterformer/error.hpp"

namespace filterformer {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kReLU: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSwish: return "swish";
  }
  return "relu";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::kReLU;
  if (name == "tanh") return Activation::kTanh;
  if (name == "swish") return Activation::kSwish;
  throw Error(ErrorKind::kConfig, "unknown activation '" + std::string(name) + "'");
}

std::vector<Index> MLPParams::widths() const {
  std::vector<Index> w;
  w.push_back(input_dim());
  for (const auto& layer : layers) w.push_back(layer.weight.rows());
  return w;
}

Index MLPParams::parameter_count() const {
  Index n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

void MLPParams::validate() const {
  require(!layers.empty(), ErrorKind::kInvalidArgument, "MLP needs at least one layer");
  require(input_shift.size() == input_scale.size(), ErrorKind::kDimensionMismatch,
          "input shift and scale must have the same length");
  require(input_shift.size() == 0 || input_shift.size() == input_dim(), ErrorKind::kDimensionMismatch,
          "input normalization length differs from the input width");
  require((input_scale.array() > 0.0).all(), ErrorKind::kInvalidArgument, "input scales must be positive");
  for (std::size_t j = 0; j < layers.size(); ++j) {
    require(layers[j].bias.size() == layers[j].weight.rows(), ErrorKind::kDimensionMismatch,
            "bias length differs from layer width at layer " + std::to_string(j));
    if (j > 0) {
      require(layers[j].weight.cols() == layers[j - 1].weight.rows(), ErrorKind::kDimensionMismatch,
              "layer " + std::to_string(j) + " does not chain");
    }
  }
}

bool has_input_normalization(const MLPParams& p) { return p.input_shift.size() > 0; }

MLPParams fold_input_normalization(const MLPParams& p) {
  MLPParams out = p;
  if (!has_input_normalization(p)) return out;
  const Vec inv = p.input_scale.cwiseInverse();
  DenseLayer& first = out.layers.front();
  first.weight = p.layers.front().weight * inv.asDiagonal();
  first.bias = p.layers.front().bias - first.weight * p.input_shift;
  out.input_shift.resize(0);
  out.input_scale.resize(0);
  return out;
}

void fit_input_normalization(MLPParams& p, const Mat& samples) {
  require(samples.rows() == p.input_dim() && samples.cols() >= 1, ErrorKind::kDimensionMismatch,
          "normalization samples do not match the input width");
  p.input_shift = samples.rowwise().mean();
  const Mat centred = samples.colwise() - p.input_shift;
  const Vec sd = (centred.rowwise().squaredNorm() / static_cast<double>(samples.cols())).cwiseSqrt();
  p.input_scale = sd.unaryExpr([](double v) { return v > 1e-12 ? v : 1.0; });
}

MLPParams init_mlp(Index input_dim, const std::vector<Index>& hidden, Index output_dim, Activation activation,
                   Rng& rng) {
  MLPParams p;
  p.activation = activation;
  std::vector<Index> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(output_dim);
  for (std::size_t j = 0; j + 1 < widths.size(); ++j) {
    const Index fan_in = widths[j];
    const Index fan_out = widths[j + 1];
    require(fan_in >= 1 && fan_out >= 1, ErrorKind::kInvalidArgument, "layer widths must be positive");
    const double scale = activation == Activation::kReLU
                             ? std::sqrt(2.0 / static_cast<double>(fan_in))
                             : std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    p.layers.push_back({rng.normal_matrix(fan_out, fan_in) * scale, Vec::Zero(fan_out)});
  }
  return p;
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kReLU: return x > 0.0 ? x : 0.0;
    case Activation::kTanh: return std::tanh(x);
    case Activation::kSwish: return x / (1.0 + std::exp(-x));
  }
  return x;
}

double activate_derivative(Activation a, double x) {
  switch (a) {
    case Activation::kReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::kSwish: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s + x * s * (1.0 - s);
    }
  }
  return 1.0;
}

namespace {

Mat apply(Activation a, const Mat& m) {
  switch (a) {
    case Activation::kReLU:
      return m.cwiseMax(0.0);
    case Activation::kTanh:
      return m.array().tanh().matrix();
    case Activation::kSwish:
      break;
  }
  return m.unaryExpr([a](double x) { return activate(a, x); });
}

Mat apply_derivative(Activation a, const Mat& m) {
  return m.unaryExpr([a](double x) { return activate_derivative(a, x); });
}

}  // namespace

Mat forward_batch(const MLPParams& p, const Mat& inputs, MLPTape* tape) {
  require(inputs.rows() == p.input_dim(), ErrorKind::kDimensionMismatch,
          "MLP input has " + std::to_string(inputs.rows()) + " rows, expected " + std::to_string(p.input_dim()));
  Mat x = inputs;
  if (has_input_normalization(p)) {
    x.colwise() -= p.input_shift;
    x = p.input_scale.cwiseInverse().asDiagonal() * x;
  }
  if (tape) {
    tape->input = x;
    tape->pre.clear();
    tape->post.clear();
  }
  for (std::size_t j = 0; j + 1 < p.layers.size(); ++j) {
    Mat pre = p.layers[j].weight * x;
    pre.colwise() += p.layers[j].bias;
    x = apply(p.activation, pre);
    if (tape) {
      tape->pre.push_back(std::move(pre));
      tape->post.push_back(x);
    }
  }
  Mat out = p.layers.back().weight * x;
  out.colwise() += p.layers.back().bias;
  return out;
}

Vec forward(const MLPParams& p, const Vec& x) { return forward_batch(p, x); }

MLPGradient zero_gradient(const MLPParams& p) {
  MLPGradient g;
  for (const auto& layer : p.layers) {
    g.layers.push_back({Mat::Zero(layer.weight.rows(), layer.weight.cols()), Vec::Zero(layer.bias.size())});
  }
  return g;
}

namespace {

/// Shared reverse pass; returns the gradient with respect to the inputs.
Mat derivative_from_tape(Activation a, const MLPTape& tape, std::size_t layer) {
  switch (a) {
    case Activation::kReLU:
      return (tape.pre[layer].array() > 0.0).cast<double>().matrix();
    case Activation::kTanh:
      return (1.0 - tape.post[layer].array().square()).matrix();
    case Activation::kSwish:
      break;
  }
  return apply_derivative(a, tape.pre[layer]);
}

Mat backward_impl(const MLPParams& p, const MLPTape& tape, const Mat& upstream, MLPGradient& g, bool want_input) {
  require(upstream.rows() == p.output_dim() && upstream.cols() == tape.input.cols(), ErrorKind::kDimensionMismatch,
          "upstream gradient does not match the MLP output");
  Mat delta = upstream;
  for (std::size_t j = p.layers.size(); j-- > 0;) {
    const Mat& below = j == 0 ? tape.input : tape.post[j - 1];
    g.layers[j].weight.noalias() = delta * below.transpose();
    g.layers[j].bias = delta.rowwise().sum();
    if (j == 0 && !want_input) break;
    Mat back = p.layers[j].weight.transpose() * delta;
    if (j > 0) back.array() *= derivative_from_tape(p.activation, tape, j - 1).array();
    delta = std::move(back);
  }
  return delta;
}

}  // namespace

MLPGradient backward_batch(const MLPParams& p, const MLPTape& tape, const Mat& upstream) {
  MLPGradient g = zero_gradient(p);
  backward_impl(p, tape, upstream, g, false);
  return g;
}

MLPGradient grad(const MLPParams& p, const Vec& x, const Vec& upstream) {
  MLPTape tape;
  forward_batch(p, x, &tape);
  MLPGradient g = zero_gradient(p);
  g.input = backward_impl(p, tape, upstream, g, true).col(0);
  if (has_input_normalization(p)) g.input = g.input.cwiseQuotient(p.input_scale);
  return g;
}

}  // namespace filterformer
