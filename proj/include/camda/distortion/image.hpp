#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace camda::distortion {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Interleaved 8-bit RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0);
  Image(int w, int h, std::vector<std::uint8_t> samples);

  std::size_t samples() const { return rgb.size(); }
  bool empty() const { return rgb.empty(); }
  std::uint8_t& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  Image crop(int x0, int y0, int w, int h) const;

  bool operator==(const Image&) const = default;
};

/// Binary P6, maxval 255. Comments in the header are skipped on read.
Image read_ppm(const std::filesystem::path& path);
Image decode_ppm(const std::vector<std::uint8_t>& bytes);
void write_ppm(const std::filesystem::path& path, const Image& image);
std::vector<std::uint8_t> encode_ppm(const Image& image);

std::uint8_t clamp_to_byte(double v);

bool is_image_file(const std::filesystem::path& path);
/// PPM or baseline JPEG, chosen by extension.
Image read_image(const std::filesystem::path& path);
/// Image files (.ppm, .jpg, .jpeg; any case) directly inside `dir`, sorted.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace camda::distortion
