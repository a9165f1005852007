#pragma once

#include <vector>

#include "camda/ad/tensor.hpp"

namespace camda::ad {

enum class PadMode { Zero, Reflect };

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
  PadMode pad_mode = PadMode::Zero;
};

struct ConvTranspose2dOptions {
  int stride = 1;
  int padding = 0;
  int output_padding = 0;
};

/// Output extent of a convolution along one axis: floor((in + 2p - k)/s) + 1.
int conv_output_size(int in, int kernel, int stride, int padding);
/// Output extent of a transposed convolution: (in - 1)s - 2p + k + output_padding.
int conv_transpose_output_size(int in, int kernel, int stride, int padding, int output_padding);

/// Cross-correlation. weight is (C_out, C_in, k, k); bias, when defined, (C_out).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions options = {});

/// Adjoint of conv2d w.r.t. its input. weight is (C_in, C_out, k, k).
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias, ConvTranspose2dOptions options = {});

/// Per-channel running statistics owned by a batch-norm layer.
template <typename T>
struct RunningStats {
  std::vector<T> mean;
  std::vector<T> var;

  static RunningStats init(int channels) {
    return {std::vector<T>(channels, T(0)), std::vector<T>(channels, T(1))};
  }
};

enum class NormMode { Train, Eval };

struct BatchNormOptions {
  NormMode mode = NormMode::Train;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Affine batch norm. Train mode normalizes with biased batch statistics and
/// folds (unbiased) variance into `stats`; eval mode uses `stats`.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     RunningStats<T>& stats, BatchNormOptions options = {});

/// Affine-free normalization over each (sample, channel) plane.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& input, double eps = 1e-5);

// Derivative at exactly 0 is taken from the positive branch (1).
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& input, double slope = 0.2);
template <typename T>
Tensor<T> relu(const Tensor<T>& input);
template <typename T>
Tensor<T> tanh(const Tensor<T>& input);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, double factor);
template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);

/// Mean of squared differences over all elements.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b);
/// Mean of absolute differences; subgradient 0 where a == b.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b);

/// Non-overlapping k x k average pooling; H and W must be multiples of k.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, int kernel);
/// (N,C,H,W) -> (N,C,1,1)
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input);

/// Mean softmax cross-entropy of logits (N,C,1,1) against integer labels.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels);

/// Extracts the (N, C, h, w) window at offset (top, left).
template <typename T>
Tensor<T> crop(const Tensor<T>& input, int top, int left, int height, int width);

}  // namespace camda::ad
