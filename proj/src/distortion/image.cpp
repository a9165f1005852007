#include "camda/distortion/image.hpp"

#include <algorithm>
#include <cmath>

namespace camda::distortion {

namespace {

void check_dims(int w, int h) {
  if (w < 1 || h < 1) {
    throw ImageError("image dimensions must be positive, got " + std::to_string(w) + "x" +
                     std::to_string(h));
  }
}

}  // namespace

Image::Image(int w, int h, std::uint8_t fill) : width(w), height(h) {
  check_dims(w, h);
  rgb.assign(static_cast<std::size_t>(w) * h * 3, fill);
}

Image::Image(int w, int h, std::vector<std::uint8_t> samples)
    : width(w), height(h), rgb(std::move(samples)) {
  check_dims(w, h);
  if (rgb.size() != static_cast<std::size_t>(w) * h * 3) {
    throw ImageError("sample count does not match " + std::to_string(w) + "x" + std::to_string(h) +
                     "x3");
  }
}

Image Image::crop(int x0, int y0, int w, int h) const {
  if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > width || y0 + h > height) {
    throw ImageError("crop window outside image");
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    const auto* src = &rgb[(static_cast<std::size_t>(y0 + y) * width + x0) * 3];
    std::copy(src, src + static_cast<std::size_t>(w) * 3, &out.rgb[static_cast<std::size_t>(y) * w * 3]);
  }
  return out;
}

std::uint8_t clamp_to_byte(double v) {
  const long r = std::lround(v);
  return static_cast<std::uint8_t>(std::clamp<long>(r, 0, 255));
}

}  // namespace camda::distortion
