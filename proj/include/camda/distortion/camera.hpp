#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "camda/distortion/image.hpp"

namespace camda::distortion {

struct CameraModelParams {
  double blur_sigma = 0.0;
  double noise_sigma = 0.0;
  int quality = 100;

  void validate() const;
};

/// Rows A-F of the simplified camera model table.
CameraModelParams camera_model(char letter);
std::vector<char> camera_model_letters();

/// blur, then AWGN, then a JPEG round trip.
Image apply_camera_model(const Image& image, const CameraModelParams& params, std::uint64_t seed);

/// Any subset of the three stages, applied in imaging-chain order.
struct Distortion {
  std::optional<double> blur_sigma;
  std::optional<double> noise_sigma;
  std::optional<int> quality;

  static Distortion from_model(const CameraModelParams& p);
  static Distortion awgn(double sigma);
  Image apply(const Image& image, std::uint64_t seed) const;
  std::string describe() const;
  bool identity() const { return !blur_sigma && !noise_sigma && !quality; }
};

/// Deterministic textured test images: gradients, flat shapes, edges and
/// fine periodic detail.
std::vector<Image> synthetic_corpus(int count, int width, int height, std::uint64_t seed);

/// Stationary textures: sums of oriented sinusoids, each channel
/// standardized to mean 128 and standard deviation 32.
std::vector<Image> synthetic_textures(int count, int width, int height, std::uint64_t seed);

}  // namespace camda::distortion
