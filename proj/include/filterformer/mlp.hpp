#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "filterformer/paths.hpp"
#include "filterformer/rng.hpp"

namespace filterformer {

enum class Activation { kReLU, kTanh, kSwish };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct DenseLayer {
  Mat weight;  ///< d_{j+1} x d_j
  Vec bias;    ///< d_{j+1}
};

/// Feedforward network x -> A_J x_J + b_J with hidden layers
/// x_{j+1} = sigma(A_j x_j + b_j). The last layer is affine.
struct MLPParams {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::kReLU;
  /// Fixed preprocessing x -> (x - input_shift) ./ input_scale ahead of the
  /// first layer; empty vectors mean identity. Not trained. It folds into
  /// the first affine layer (see fold_input_normalization).
  Vec input_shift;
  Vec input_scale;

  Index input_dim() const { return layers.front().weight.cols(); }
  Index output_dim() const { return layers.back().weight.rows(); }
  Index hidden_layers() const { return static_cast<Index>(layers.size()) - 1; }
  /// d_0, d_1, ..., d_{J+1}
  std::vector<Index> widths() const;
  Index parameter_count() const;
  void validate() const;
};

bool has_input_normalization(const MLPParams& p);

/// Equivalent network with the input normalization folded into layer 0.
MLPParams fold_input_normalization(const MLPParams& p);

/// Per-row mean and standard deviation of `samples` (columns are inputs);
/// rows with standard deviation below 1e-12 keep scale 1.
void fit_input_normalization(MLPParams& p, const Mat& samples);

/// Gaussian initialization: He scaling sqrt(2/fan_in) for ReLU, Glorot
/// sqrt(2/(fan_in + fan_out)) for tanh and swish; zero biases.
MLPParams init_mlp(Index input_dim, const std::vector<Index>& hidden, Index output_dim, Activation activation,
                   Rng& rng);

double activate(Activation a, double x);
/// Derivative; ReLU'(0) is taken as 0.
double activate_derivative(Activation a, double x);

Vec forward(const MLPParams& p, const Vec& x);

struct MLPGradient {
  std::vector<DenseLayer> layers;
  Vec input;
};

/// Reverse-mode gradient of <upstream, forward(p, x)> with respect to the
/// parameters and the input.
MLPGradient grad(const MLPParams& p, const Vec& x, const Vec& upstream);

/// Intermediate values of a batched forward pass; columns are samples.
struct MLPTape {
  Mat input;  ///< after input normalization
  std::vector<Mat> pre;   ///< pre-activations of hidden layers
  std::vector<Mat> post;  ///< activations of hidden layers
};

Mat forward_batch(const MLPParams& p, const Mat& inputs, MLPTape* tape = nullptr);

/// Gradient summed over the batch; `upstream` has one column per sample.
/// The input gradient is left empty.
MLPGradient backward_batch(const MLPParams& p, const MLPTape& tape, const Mat& upstream);

MLPGradient zero_gradient(const MLPParams& p);

}  // namespace filterformer
