#include "camda/harness/synthetic.hpp"

#include <cmath>
#include <vector>
#include <numbers>
#include <random>
#include <stdexcept>

namespace camda::harness {

std::string split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::vector<int> LabeledDataset::histogram() const {
  std::vector<int> h(static_cast<std::size_t>(std::max(classes, 0)), 0);
  for (int l : labels) {
    if (l >= 0 && l < classes) ++h[static_cast<std::size_t>(l)];
  }
  return h;
}

void LabeledDataset::validate() const {
  if (images.empty()) throw std::invalid_argument("labeled dataset is empty");
  if (images.size() != labels.size()) throw std::invalid_argument("image and label counts differ");
  for (int l : labels) {
    if (l < 0 || l >= classes) throw std::invalid_argument("label " + std::to_string(l) + " out of range");
  }
}

LabeledDataset LabeledDataset::with_images(std::vector<Image> replaced) const {
  if (replaced.size() != images.size()) throw std::invalid_argument("replacement image count differs");
  LabeledDataset d = *this;
  d.images = std::move(replaced);
  return d;
}

namespace {

// Point (u, v) in shape-local coordinates scaled to the unit circle.
bool inside(int shape, double u, double v) {
  const double s3 = std::sqrt(3.0);
  switch (shape) {
    case 0: return u * u + v * v <= 1;
    case 1: return std::abs(u) <= 0.75 && std::abs(v) <= 0.75;
    case 2: return v >= -0.5 && s3 * u + v <= 1 && -s3 * u + v <= 1;
    case 3: return (std::abs(u) <= 0.28 && std::abs(v) <= 1) || (std::abs(v) <= 0.28 && std::abs(u) <= 1);
    case 4: {
      const double r2 = u * u + v * v;
      return r2 <= 1 && r2 >= 0.36;
    }
    default: return std::abs(u) <= 1 && std::abs(v) <= 0.3;
  }
}

// Class-specific fill: solid, stripes, checkerboard, dots, diagonal
// stripes, grid; all with a 4 px period in shape-local coordinates.
double fill(int shape, double u, double v) {
  const double k = std::numbers::pi / 2;
  switch (shape) {
    case 0: return 0;
    case 1: return std::sin(k * u) > 0 ? 1 : -1;
    case 2: return std::sin(k * u) * std::sin(k * v) > 0 ? 1 : -1;
    case 3: return std::cos(k * u) + std::cos(k * v) > 1 ? 1 : -1;
    case 4: return std::sin(k * (u + v) / std::numbers::sqrt2) > 0 ? 1 : -1;
    default: return std::cos(k * u) > 0.7 || std::cos(k * v) > 0.7 ? 1 : -1;
  }
}

std::uint64_t split_stream(std::uint64_t seed, Split split) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(split) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr double kPatternAmplitude = 18;
constexpr double kChannelMean = 128;
constexpr double kChannelStd = 40;

Image render(int shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int side = kSyntheticSide;
  double bg[3], fg[3];
  const double bg_luma = 60 + 140 * u(rng);
  // Foreground luma at least 50 levels away from the background.
  double fg_luma = 25 + 205 * u(rng);
  while (std::abs(fg_luma - bg_luma) < 50) fg_luma = 25 + 205 * u(rng);
  for (int c = 0; c < 3; ++c) {
    bg[c] = bg_luma + (u(rng) - 0.5) * 60;
    fg[c] = fg_luma + (u(rng) - 0.5) * 60;
  }
  const double period = 6 + 14 * u(rng), angle = u(rng) * std::numbers::pi, amp = 3 + 5 * u(rng);
  const double kx = std::cos(angle) * 2 * std::numbers::pi / period;
  const double ky = std::sin(angle) * 2 * std::numbers::pi / period;
  const double gx = (u(rng) - 0.5) * 40, gy = (u(rng) - 0.5) * 40;

  const double radius = 11 + 8 * u(rng);
  const double cx = radius + (side - 2 * radius) * u(rng);
  const double cy = radius + (side - 2 * radius) * u(rng);
  const double rot = 2 * std::numbers::pi * u(rng);
  const double cr = std::cos(rot), sr = std::sin(rot);

  std::vector<double> raw(static_cast<std::size_t>(side) * side * 3);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      // 2x2 supersampled coverage for anti-aliased edges.
      double cover = 0, pattern = 0;
      for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx) {
          const double px = x + 0.25 + 0.5 * sx - cx, py = y + 0.25 + 0.5 * sy - cy;
          const double lu = cr * px + sr * py, lv = -sr * px + cr * py;
          if (inside(shape, lu / radius, lv / radius)) {
            cover += 0.25;
            pattern += 0.25 * fill(shape, lu, lv);
          }
        }
      const double tex = amp * std::sin(kx * x + ky * y) + gx * x / side + gy * y / side;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - cover) * (bg[c] + tex) + cover * fg[c] + kPatternAmplitude * pattern;
        raw[(static_cast<std::size_t>(y) * side + x) * 3 + c] = v;
      }
    }
  }
  // Per-channel standardization: every image shares the same channel
  // statistics, so content is carried by structure alone.
  Image img(side, side);
  const std::size_t n = raw.size() / 3;
  for (int c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < n; ++i) mean += raw[3 * i + c];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) var += (raw[3 * i + c] - mean) * (raw[3 * i + c] - mean);
    const double inv = 1.0 / std::sqrt(var / static_cast<double>(n) + 1e-6);
    for (std::size_t i = 0; i < n; ++i) {
      img.rgb[3 * i + c] = distortion::clamp_to_byte(kChannelMean + kChannelStd * (raw[3 * i + c] - mean) * inv);
    }
  }
  return img;
}

}  // namespace

LabeledDataset generate_synthetic_dataset(std::uint64_t seed, int n_per_class, int classes, Split split) {
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  if (classes < 2 || classes > kMaxClasses) {
    throw std::invalid_argument("classes must be in [2, " + std::to_string(kMaxClasses) + "]");
  }
  std::mt19937_64 rng(split_stream(seed, split));
  LabeledDataset d;
  d.split = split;
  d.classes = classes;
  for (int i = 0; i < n_per_class * classes; ++i) {
    const int label = i % classes;
    d.images.push_back(render(label, rng));
    d.labels.push_back(label);
  }
  return d;
}

}  // namespace camda::harness
