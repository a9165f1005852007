#pragma once

#include <utility>
#include <vector>

#include "camda/distortion/image.hpp"

namespace camda::distortion {

/// 10 log10(255^2 / MSE); +infinity for identical images.
double psnr(const Image& a, const Image& b);
double mse(const Image& a, const Image& b);
double mean_psnr(const std::vector<std::pair<Image, Image>>& pairs);
double mean_psnr(const std::vector<Image>& a, const std::vector<Image>& b);

}  // namespace camda::distortion
