#include <algorithm>
#include <cmath>

#include "camda/distortion/jpeg.hpp"
#include "jpeg_internal.hpp"

namespace camda::distortion {

namespace {

using detail::HuffmanSpec;

struct Code {
  std::uint16_t bits = 0;
  std::uint8_t length = 0;
};

// Canonical code assignment from the BITS/HUFFVAL lists.
std::array<Code, 256> build_codes(const HuffmanSpec& spec) {
  std::array<Code, 256> table{};
  std::uint16_t code = 0;
  std::size_t k = 0;
  for (int len = 1; len <= 16; ++len) {
    for (int i = 0; i < spec.bits[len - 1]; ++i) {
      table[spec.values[k++]] = {code, static_cast<std::uint8_t>(len)};
      ++code;
    }
    code <<= 1;
  }
  return table;
}

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void put(std::uint32_t bits, int length) {
    for (int i = length - 1; i >= 0; --i) {
      acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((bits >> i) & 1u));
      if (++count_ == 8) emit();
    }
  }

  void flush() {
    while (count_ != 0) put(1, 1);
  }

 private:
  void emit() {
    out_.push_back(acc_);
    if (acc_ == 0xFF) out_.push_back(0x00);
    acc_ = 0;
    count_ = 0;
  }

  std::vector<std::uint8_t>& out_;
  std::uint8_t acc_ = 0;
  int count_ = 0;
};

int category(int v) {
  int n = 0;
  for (int a = std::abs(v); a != 0; a >>= 1) ++n;
  return n;
}

std::uint32_t magnitude_bits(int v, int cat) {
  return static_cast<std::uint32_t>(v >= 0 ? v : v + (1 << cat) - 1) & ((1u << cat) - 1);
}

struct EntropyCoder {
  std::array<Code, 256> dc, ac;

  void block(BitWriter& w, const std::array<int, 64>& zz, int& previous_dc) const {
    const int diff = zz[0] - previous_dc;
    previous_dc = zz[0];
    const int dcat = category(diff);
    w.put(dc[dcat].bits, dc[dcat].length);
    if (dcat) w.put(magnitude_bits(diff, dcat), dcat);
    int run = 0;
    for (int k = 1; k < 64; ++k) {
      if (zz[k] == 0) {
        ++run;
        continue;
      }
      while (run > 15) {
        w.put(ac[0xF0].bits, ac[0xF0].length);
        run -= 16;
      }
      const int cat = category(zz[k]);
      const int sym = (run << 4) | cat;
      w.put(ac[sym].bits, ac[sym].length);
      w.put(magnitude_bits(zz[k], cat), cat);
      run = 0;
    }
    if (run > 0) w.put(ac[0x00].bits, ac[0x00].length);
  }
};

// Planes are stored padded to whole MCUs.
struct Plane {
  int width = 0, height = 0;
  std::vector<double> v;
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

std::array<int, 64> transform_block(const Plane& p, int bx, int by, const QTable& q) {
  const auto& b = detail::dct_basis();
  double s[8][8], tmp[8][8];
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) s[y][x] = p.at(bx + x, by + y) - 128.0;
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double acc = 0;
      for (int x = 0; x < 8; ++x) acc += b[u][x] * s[y][x];
      tmp[y][u] = acc;
    }
  std::array<int, 64> zz{};
  const auto& order = zigzag_order();
  for (int k = 0; k < 64; ++k) {
    const int v = order[k] / 8, u = order[k] % 8;
    double acc = 0;
    for (int y = 0; y < 8; ++y) acc += b[v][y] * tmp[y][u];
    zz[k] = static_cast<int>(std::lround(acc / q[order[k]]));
  }
  return zz;
}

void put16(std::vector<std::uint8_t>& out, int v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void marker(std::vector<std::uint8_t>& out, std::uint8_t m) {
  out.push_back(0xFF);
  out.push_back(m);
}

void write_dqt(std::vector<std::uint8_t>& out, int id, const QTable& q) {
  marker(out, 0xDB);
  put16(out, 67);
  out.push_back(static_cast<std::uint8_t>(id));
  for (int k = 0; k < 64; ++k) out.push_back(static_cast<std::uint8_t>(q[zigzag_order()[k]]));
}

void write_dht(std::vector<std::uint8_t>& out, int cls, int id, const HuffmanSpec& spec) {
  marker(out, 0xC4);
  put16(out, 2 + 1 + 16 + static_cast<int>(spec.values.size()));
  out.push_back(static_cast<std::uint8_t>((cls << 4) | id));
  out.insert(out.end(), spec.bits.begin(), spec.bits.end());
  out.insert(out.end(), spec.values.begin(), spec.values.end());
}

}  // namespace

std::vector<std::uint8_t> jpeg_encode(const Image& image, int quality) {
  if (image.width < 1 || image.height < 1 || image.width > 65535 || image.height > 65535) {
    throw JpegError("jpeg_encode: unsupported dimensions");
  }
  const QTables q = quality_to_qtables(quality);
  const int mcu_x = (image.width + 15) / 16, mcu_y = (image.height + 15) / 16;
  const int pw = mcu_x * 16, ph = mcu_y * 16;

  // Full-resolution YCbCr with edge replication into the padding.
  Plane y{pw, ph, std::vector<double>(static_cast<std::size_t>(pw) * ph)};
  Plane cb_full = y, cr_full = y;
  for (int j = 0; j < ph; ++j)
    for (int i = 0; i < pw; ++i) {
      const int sx = std::min(i, image.width - 1), sy = std::min(j, image.height - 1);
      const double r = image.at(sx, sy, 0), g = image.at(sx, sy, 1), b = image.at(sx, sy, 2);
      const std::size_t idx = static_cast<std::size_t>(j) * pw + i;
      y.v[idx] = 0.299 * r + 0.587 * g + 0.114 * b;
      cb_full.v[idx] = -0.168735892 * r - 0.331264108 * g + 0.5 * b + 128.0;
      cr_full.v[idx] = 0.5 * r - 0.418687589 * g - 0.081312411 * b + 128.0;
    }
  auto subsample = [&](const Plane& full) {
    Plane p{pw / 2, ph / 2, std::vector<double>(static_cast<std::size_t>(pw / 2) * (ph / 2))};
    for (int j = 0; j < p.height; ++j)
      for (int i = 0; i < p.width; ++i) {
        p.v[static_cast<std::size_t>(j) * p.width + i] =
            0.25 * (full.at(2 * i, 2 * j) + full.at(2 * i + 1, 2 * j) + full.at(2 * i, 2 * j + 1) +
                    full.at(2 * i + 1, 2 * j + 1));
      }
    return p;
  };
  const Plane cb = subsample(cb_full), cr = subsample(cr_full);

  std::vector<std::uint8_t> out;
  marker(out, 0xD8);
  marker(out, 0xE0);  // JFIF APP0
  put16(out, 16);
  for (char ch : {'J', 'F', 'I', 'F', '\0'}) out.push_back(static_cast<std::uint8_t>(ch));
  out.insert(out.end(), {1, 1, 0});
  put16(out, 1);
  put16(out, 1);
  out.insert(out.end(), {0, 0});
  write_dqt(out, 0, q.luma);
  write_dqt(out, 1, q.chroma);

  marker(out, 0xC0);
  put16(out, 17);
  out.push_back(8);
  put16(out, image.height);
  put16(out, image.width);
  out.push_back(3);
  out.insert(out.end(), {1, 0x22, 0, 2, 0x11, 1, 3, 0x11, 1});

  write_dht(out, 0, 0, detail::dc_luma_spec());
  write_dht(out, 1, 0, detail::ac_luma_spec());
  write_dht(out, 0, 1, detail::dc_chroma_spec());
  write_dht(out, 1, 1, detail::ac_chroma_spec());

  marker(out, 0xDA);
  put16(out, 12);
  out.push_back(3);
  out.insert(out.end(), {1, 0x00, 2, 0x11, 3, 0x11});
  out.insert(out.end(), {0, 63, 0});

  const EntropyCoder luma{build_codes(detail::dc_luma_spec()), build_codes(detail::ac_luma_spec())};
  const EntropyCoder chroma{build_codes(detail::dc_chroma_spec()),
                            build_codes(detail::ac_chroma_spec())};
  BitWriter w(out);
  int dc_y = 0, dc_cb = 0, dc_cr = 0;
  for (int my = 0; my < mcu_y; ++my)
    for (int mx = 0; mx < mcu_x; ++mx) {
      for (int by = 0; by < 2; ++by)
        for (int bx = 0; bx < 2; ++bx)
          luma.block(w, transform_block(y, mx * 16 + bx * 8, my * 16 + by * 8, q.luma), dc_y);
      chroma.block(w, transform_block(cb, mx * 8, my * 8, q.chroma), dc_cb);
      chroma.block(w, transform_block(cr, mx * 8, my * 8, q.chroma), dc_cr);
    }
  w.flush();
  marker(out, 0xD9);
  return out;
}

}  // namespace camda::distortion
