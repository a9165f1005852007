#include "camda/distortion/camera.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "camda/distortion/filters.hpp"
#include "camda/distortion/jpeg.hpp"

namespace camda::distortion {

void CameraModelParams::validate() const {
  if (!(blur_sigma >= 0)) throw std::invalid_argument("blur sigma must be >= 0");
  if (!(noise_sigma >= 0)) throw std::invalid_argument("noise sigma must be >= 0");
  if (quality < 1 || quality > 100) throw std::invalid_argument("JPEG quality must be in [1, 100]");
}

CameraModelParams camera_model(char letter) {
  switch (letter) {
    case 'A': case 'a': return {1, 5, 34};
    case 'B': case 'b': return {1, 5, 26};
    case 'C': case 'c': return {1, 10, 34};
    case 'D': case 'd': return {3, 5, 34};
    case 'E': case 'e': return {3, 10, 34};
    case 'F': case 'f': return {3, 10, 18};
    default: throw std::invalid_argument(std::string("unknown camera model '") + letter + "'");
  }
}

std::vector<char> camera_model_letters() { return {'A', 'B', 'C', 'D', 'E', 'F'}; }

Image apply_camera_model(const Image& image, const CameraModelParams& p, std::uint64_t seed) {
  p.validate();
  return jpeg_decode(jpeg_encode(awgn(blur(image, p.blur_sigma), p.noise_sigma, seed), p.quality));
}

Distortion Distortion::from_model(const CameraModelParams& p) {
  p.validate();
  return {p.blur_sigma, p.noise_sigma, p.quality};
}

Distortion Distortion::awgn(double sigma) { return {std::nullopt, sigma, std::nullopt}; }

Image Distortion::apply(const Image& image, std::uint64_t seed) const {
  Image out = image;
  if (blur_sigma) out = blur(out, *blur_sigma);
  if (noise_sigma) out = distortion::awgn(out, *noise_sigma, seed);
  if (quality) out = jpeg_decode(jpeg_encode(out, *quality));
  return out;
}

std::string Distortion::describe() const {
  std::ostringstream s;
  const char* sep = "";
  if (blur_sigma) s << std::exchange(sep, "+") << "blur" << *blur_sigma;
  if (noise_sigma) s << std::exchange(sep, "+") << "awgn" << *noise_sigma;
  if (quality) s << std::exchange(sep, "+") << "jpeg" << *quality;
  if (identity()) s << "none";
  return s.str();
}

std::vector<Image> synthetic_corpus(int count, int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    std::vector<double> px(static_cast<std::size_t>(width) * height * 3);
    double base[3], slope[3][2];
    for (int c = 0; c < 3; ++c) {
      base[c] = 90 + 70 * u(rng);
      slope[c][0] = (u(rng) - 0.5) * 80;
      slope[c][1] = (u(rng) - 0.5) * 80;
    }
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        for (int c = 0; c < 3; ++c)
          px[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
              base[c] + slope[c][0] * x / width + slope[c][1] * y / height;

    // Flat-colored rectangles and discs give sharp edges.
    const int shapes = 4 + static_cast<int>(u(rng) * 5);
    for (int s = 0; s < shapes; ++s) {
      const double cx = u(rng) * width, cy = u(rng) * height;
      const double rx = (0.08 + 0.22 * u(rng)) * width, ry = (0.08 + 0.22 * u(rng)) * height;
      const bool disc = u(rng) < 0.5;
      double color[3];
      const double luma = 25 + 205 * u(rng);
      for (auto& c : color) c = luma + (u(rng) - 0.5) * 50;
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const double dx = (x - cx) / rx, dy = (y - cy) / ry;
          const bool inside = disc ? dx * dx + dy * dy <= 1 : std::abs(dx) <= 1 && std::abs(dy) <= 1;
          if (!inside) continue;
          for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(y) * width + x) * 3 + c] = color[c];
        }
    }

    // Periodic texture patches at randomized frequency and orientation.
    const int patches = 2 + static_cast<int>(u(rng) * 3);
    for (int s = 0; s < patches; ++s) {
      const int pw = static_cast<int>((0.2 + 0.3 * u(rng)) * width);
      const int ph = static_cast<int>((0.2 + 0.3 * u(rng)) * height);
      const int x0 = static_cast<int>(u(rng) * (width - pw)), y0 = static_cast<int>(u(rng) * (height - ph));
      const double period = 4 + 12 * u(rng), angle = u(rng) * std::numbers::pi;
      const double amp = 8 + 16 * u(rng);
      const double kx = std::cos(angle) * 2 * std::numbers::pi / period;
      const double ky = std::sin(angle) * 2 * std::numbers::pi / period;
      for (int y = y0; y < y0 + ph; ++y)
        for (int x = x0; x < x0 + pw; ++x) {
          const double t = amp * std::sin(kx * x + ky * y);
          for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(y) * width + x) * 3 + c] += t;
        }
    }

    Image img(width, height);
    for (std::size_t i = 0; i < px.size(); ++i) img.rgb[i] = clamp_to_byte(px[i]);
    out.push_back(blur(img, 0.6));
  }
  return out;
}

std::vector<Image> synthetic_textures(int count, int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    std::vector<double> px(plane * 3, 0.0);
    for (int k = 0; k < 6; ++k) {
      const double period = 8 + 24 * u(rng), angle = u(rng) * std::numbers::pi;
      const double phase = 2 * std::numbers::pi * u(rng), amp = 0.5 + u(rng);
      const double kx = std::cos(angle) * 2 * std::numbers::pi / period;
      const double ky = std::sin(angle) * 2 * std::numbers::pi / period;
      double mix[3];
      for (auto& m : mix) m = 0.6 + 0.8 * u(rng);
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const double t = amp * std::sin(kx * x + ky * y + phase);
          for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(y) * width + x) * 3 + c] += mix[c] * t;
        }
    }
    Image img(width, height);
    for (int c = 0; c < 3; ++c) {
      double s = 0, s2 = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        s += px[i * 3 + c];
        s2 += px[i * 3 + c] * px[i * 3 + c];
      }
      const double mean = s / plane;
      const double sd = std::sqrt(std::max(s2 / plane - mean * mean, 1e-12));
      for (std::size_t i = 0; i < plane; ++i) img.rgb[i * 3 + c] = clamp_to_byte(128 + 32 * (px[i * 3 + c] - mean) / sd);
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace camda::distortion
