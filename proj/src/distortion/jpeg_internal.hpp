#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace camda::distortion::detail {

struct HuffmanSpec {
  std::array<std::uint8_t, 16> bits;  // number of codes of each length 1..16
  std::vector<std::uint8_t> values;
};

const HuffmanSpec& dc_luma_spec();
const HuffmanSpec& ac_luma_spec();
const HuffmanSpec& dc_chroma_spec();
const HuffmanSpec& ac_chroma_spec();

/// cos((2x+1) u pi / 16) * c(u) / 2, indexed [u][x].
const std::array<std::array<double, 8>, 8>& dct_basis();

}  // namespace camda::distortion::detail
