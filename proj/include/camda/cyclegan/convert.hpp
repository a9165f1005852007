#pragma once

#include <vector>

#include "camda/ad/tensor.hpp"
#include "camda/distortion/image.hpp"

namespace camda::cyclegan {

using distortion::Image;

/// [0, 255] -> [-1, 1], shape (1, 3, H, W).
template <typename T = float>
ad::Tensor<T> normalize_image(const Image& image);
/// Stacks equally sized images into (N, 3, H, W).
template <typename T = float>
ad::Tensor<T> normalize_batch(const std::vector<Image>& images);
/// Inverse of normalize_image for sample `index` of the batch, rounding and
/// clamping to [0, 255].
template <typename T = float>
Image denormalize(const ad::Tensor<T>& tensor, int index = 0);

}  // namespace camda::cyclegan
