#pragma once

#include <cstdint>
#include <vector>

#include "camda/distortion/image.hpp"

namespace camda::distortion {

struct Kernel2D {
  int side = 0;
  std::vector<double> values;  // side * side, row-major

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * side + j]; }
};

/// Normalized Gaussian of side 2*ceil(3 sigma)+1. Throws std::invalid_argument for sigma <= 0.
Kernel2D gaussian_kernel(double sigma);

/// Per-channel Gaussian blur with reflect borders; sigma == 0 is the identity.
Image blur(const Image& image, double sigma);

/// Adds i.i.d. N(0, sigma^2) to every sample, then rounds and clamps.
Image awgn(const Image& image, double sigma, std::uint64_t seed);

}  // namespace camda::distortion
