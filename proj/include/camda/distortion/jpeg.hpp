#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "camda/distortion/image.hpp"

namespace camda::distortion {

class JpegError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using QTable = std::array<std::uint16_t, 64>;  // natural (row-major) order

struct QTables {
  QTable luma;
  QTable chroma;
};

/// IJG quality scaling of the Annex K base tables.
QTables quality_to_qtables(int quality);
const QTable& base_luma_table();
const QTable& base_chroma_table();
/// zigzag_order()[k] is the natural index of the k-th zigzag coefficient.
const std::array<int, 64>& zigzag_order();

/// Baseline sequential JFIF, YCbCr 4:2:0, standard Huffman tables.
std::vector<std::uint8_t> jpeg_encode(const Image& image, int quality);

/// Baseline (SOF0/SOF1) Huffman decoder. Handles 1 or 3 components,
/// sampling factors up to 4 and restart intervals; chroma is upsampled by
/// replication.
Image jpeg_decode(const std::vector<std::uint8_t>& stream);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace camda::distortion
