#include "camda/distortion/filters.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace camda::distortion {

namespace {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

std::vector<double> kernel_1d(double sigma) {
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0;
  for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-(i * i) / (2 * sigma * sigma));
  for (auto& v : k) v /= total;
  return k;
}

}  // namespace

Kernel2D gaussian_kernel(double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  Kernel2D k{2 * radius + 1, {}};
  k.values.resize(static_cast<std::size_t>(k.side) * k.side);
  double total = 0;
  for (int i = -radius; i <= radius; ++i)
    for (int j = -radius; j <= radius; ++j) {
      const double v = std::exp(-(i * i + j * j) / (2 * sigma * sigma));
      k.values[static_cast<std::size_t>(i + radius) * k.side + (j + radius)] = v;
      total += v;
    }
  for (auto& v : k.values) v /= total;
  return k;
}

// The normalized 2D Gaussian is the outer product of the normalized 1D one,
// so two 1D passes give the same result as the full kernel.
Image blur(const Image& image, double sigma) {
  if (sigma < 0) throw std::invalid_argument("blur: sigma must be >= 0");
  if (sigma == 0) return image;
  const auto k = kernel_1d(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int w = image.width, h = image.height;
  std::vector<double> tmp(image.samples());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int t = -radius; t <= radius; ++t) acc += k[t + radius] * image.at(reflect_index(x + t, w), y, c);
        tmp[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
      }
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int t = -radius; t <= radius; ++t)
          acc += k[t + radius] * tmp[(static_cast<std::size_t>(reflect_index(y + t, h)) * w + x) * 3 + c];
        out.at(x, y, c) = clamp_to_byte(acc);
      }
  return out;
}

Image awgn(const Image& image, double sigma, std::uint64_t seed) {
  if (sigma < 0) throw std::invalid_argument("awgn: sigma must be >= 0");
  if (sigma == 0) return image;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  Image out = image;
  for (auto& v : out.rgb) v = clamp_to_byte(v + noise(rng));
  return out;
}

}  // namespace camda::distortion
