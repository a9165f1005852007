#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camda/distortion/image.hpp"

namespace camda::harness {

using distortion::Image;

enum class Split { Train, Val, Test };
std::string split_name(Split split);

/// Images with class labels; labels are never touched by emulation.
struct LabeledDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  Split split = Split::Train;
  int classes = 0;

  std::size_t size() const { return images.size(); }
  std::vector<int> histogram() const;
  /// Throws std::invalid_argument on empty data, length mismatch or
  /// out-of-range labels.
  void validate() const;
  /// Same labels and split, new pixels.
  LabeledDataset with_images(std::vector<Image> replaced) const;
};

constexpr int kMaxClasses = 6;
constexpr int kSyntheticSide = 64;

/// 64x64 renderings of one shape per image (disc, square, triangle, cross,
/// ring, bar), each class with its own fine fill pattern, under random pose
/// and colors on a textured background, each channel standardized to mean
/// 128 and standard deviation 40. Splits draw from independent streams of
/// the same seed, so they never share an image. Labels cycle through the
/// classes, giving a uniform histogram.
LabeledDataset generate_synthetic_dataset(std::uint64_t seed, int n_per_class, int classes = 4,
                                          Split split = Split::Train);

}  // namespace camda::harness
