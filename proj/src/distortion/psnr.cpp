#include "camda/distortion/psnr.hpp"

#include <cmath>
#include <limits>

namespace camda::distortion {

double mse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.samples() != b.samples()) {
    throw ImageError("psnr: dimension mismatch " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
  double acc = 0;
  for (std::size_t i = 0; i < a.samples(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.samples());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m == 0) return std::numeric_limits<double>::infinity();
  return 10 * std::log10(255.0 * 255.0 / m);
}

double mean_psnr(const std::vector<std::pair<Image, Image>>& pairs) {
  if (pairs.empty()) throw ImageError("mean_psnr: empty corpus");
  double acc = 0;
  for (const auto& [a, b] : pairs) acc += psnr(a, b);
  return acc / static_cast<double>(pairs.size());
}

double mean_psnr(const std::vector<Image>& a, const std::vector<Image>& b) {
  if (a.size() != b.size()) throw ImageError("mean_psnr: corpus sizes differ");
  if (a.empty()) throw ImageError("mean_psnr: empty corpus");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += psnr(a[i], b[i]);
  return acc / static_cast<double>(a.size());
}

}  // namespace camda::distortion
