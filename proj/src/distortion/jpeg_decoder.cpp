#include <algorithm>
#include <cmath>
#include <optional>

#include "camda/distortion/jpeg.hpp"
#include "jpeg_internal.hpp"

namespace camda::distortion {

namespace {

struct HuffmanTable {
  std::array<int, 17> maxcode{};  // largest code of each length, -1 if none
  std::array<int, 17> valptr{};
  std::array<int, 17> mincode{};
  std::vector<std::uint8_t> values;
  bool defined = false;

  void build(const std::array<std::uint8_t, 16>& bits, std::vector<std::uint8_t> vals) {
    values = std::move(vals);
    int code = 0, k = 0;
    for (int len = 1; len <= 16; ++len) {
      valptr[len] = k;
      mincode[len] = code;
      code += bits[len - 1];
      k += bits[len - 1];
      maxcode[len] = bits[len - 1] ? code - 1 : -1;
      if (code > (1 << len)) throw JpegError("invalid Huffman table");
      code <<= 1;
    }
    defined = true;
  }
};

struct Component {
  int id = 0, h = 1, v = 1, tq = 0;
  int td = 0, ta = 0;
  int plane_w = 0, plane_h = 0;
  std::vector<std::uint8_t> samples;
  int dc_pred = 0;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& s) : s_(s) {}

  std::uint8_t byte() {
    if (pos_ >= s_.size()) throw JpegError("unexpected end of JPEG stream");
    return s_[pos_++];
  }
  int u16() {
    const int hi = byte();
    return (hi << 8) | byte();
  }
  void skip(std::size_t n) {
    if (s_.size() - pos_ < n) throw JpegError("segment extends past end of stream");
    pos_ += n;
  }

  // Entropy-coded data access.
  int bit() {
    if (nbits_ == 0) fill();
    --nbits_;
    return (acc_ >> nbits_) & 1;
  }
  int bits(int n) {
    int v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | bit();
    return v;
  }
  void reset_bits() { nbits_ = 0; }

  // Returns the next marker code, aligning past any remaining entropy data.
  std::uint8_t next_marker() {
    reset_bits();
    if (pending_marker_) {
      const std::uint8_t m = *pending_marker_;
      pending_marker_.reset();
      return m;
    }
    while (true) {
      std::uint8_t b = byte();
      if (b != 0xFF) continue;
      while (b == 0xFF) b = byte();
      if (b != 0x00) return b;
    }
  }

  std::size_t pos() const { return pos_; }

 private:
  void fill() {
    if (pending_marker_) {
      acc_ = 0;  // past a marker: feed zero bits
    } else {
      std::uint8_t b = byte();
      if (b == 0xFF) {
        std::uint8_t next = byte();
        while (next == 0xFF) next = byte();
        if (next != 0x00) {
          pending_marker_ = next;
          b = 0;
        }
      }
      acc_ = b;
    }
    nbits_ = 8;
  }

  const std::vector<std::uint8_t>& s_;
  std::size_t pos_ = 0;
  int acc_ = 0, nbits_ = 0;
  std::optional<std::uint8_t> pending_marker_;
};

int decode_symbol(Reader& r, const HuffmanTable& t) {
  int code = 0;
  for (int len = 1; len <= 16; ++len) {
    code = (code << 1) | r.bit();
    if (t.maxcode[len] >= 0 && code <= t.maxcode[len]) {
      return t.values.at(static_cast<std::size_t>(t.valptr[len] + code - t.mincode[len]));
    }
  }
  throw JpegError("corrupt entropy-coded data");
}

int extend(int v, int cat) { return v < (1 << (cat - 1)) ? v - (1 << cat) + 1 : v; }

// Separable float AAN inverse DCT. The dequantization table folds in the
// AAN row/column scale factors and the final 1/8.
using FloatQTable = std::array<float, 64>;

FloatQTable aan_table(const QTable& q) {
  static constexpr double kScale[8] = {1.0,         1.387039845, 1.306562965, 1.175875602,
                                       1.0,         0.785694958, 0.541196100, 0.275899379};
  FloatQTable t{};
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) t[r * 8 + c] = static_cast<float>(q[r * 8 + c] * kScale[r] * kScale[c] * 0.125);
  return t;
}

void idct_1d(float* d, int stride) {
  float tmp0 = d[0], tmp1 = d[2 * stride], tmp2 = d[4 * stride], tmp3 = d[6 * stride];
  float tmp10 = tmp0 + tmp2, tmp11 = tmp0 - tmp2;
  float tmp13 = tmp1 + tmp3;
  float tmp12 = (tmp1 - tmp3) * 1.414213562f - tmp13;
  tmp0 = tmp10 + tmp13;
  tmp3 = tmp10 - tmp13;
  tmp1 = tmp11 + tmp12;
  tmp2 = tmp11 - tmp12;

  float tmp4 = d[stride], tmp5 = d[3 * stride], tmp6 = d[5 * stride], tmp7 = d[7 * stride];
  const float z13 = tmp6 + tmp5, z10 = tmp6 - tmp5, z11 = tmp4 + tmp7, z12 = tmp4 - tmp7;
  tmp7 = z11 + z13;
  tmp11 = (z11 - z13) * 1.414213562f;
  const float z5 = (z10 + z12) * 1.847759065f;
  tmp10 = z5 - z12 * 1.082392200f;
  tmp12 = z5 - z10 * 2.613125930f;
  tmp6 = tmp12 - tmp7;
  tmp5 = tmp11 - tmp6;
  tmp4 = tmp10 - tmp5;

  d[0] = tmp0 + tmp7;
  d[7 * stride] = tmp0 - tmp7;
  d[stride] = tmp1 + tmp6;
  d[6 * stride] = tmp1 - tmp6;
  d[2 * stride] = tmp2 + tmp5;
  d[5 * stride] = tmp2 - tmp5;
  d[3 * stride] = tmp3 + tmp4;
  d[4 * stride] = tmp3 - tmp4;
}

void idct_block(const std::array<int, 64>& coeff, const FloatQTable& q, Component& c, int bx, int by) {
  float ws[64];
  for (int i = 0; i < 64; ++i) ws[i] = static_cast<float>(coeff[i]) * q[i];
  for (int col = 0; col < 8; ++col) idct_1d(ws + col, 8);
  for (int row = 0; row < 8; ++row) {
    float* r = ws + row * 8;
    r[0] += 128.5f;
    idct_1d(r, 1);
    for (int x = 0; x < 8; ++x) {
      const int v = static_cast<int>(std::floor(r[x]));
      c.samples[static_cast<std::size_t>(by + row) * c.plane_w + bx + x] =
          static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
  }
}

struct Decoder {
  std::array<QTable, 4> qt{};
  std::array<bool, 4> qt_defined{};
  std::array<HuffmanTable, 4> dc{}, ac{};
  std::vector<Component> comps;
  int width = 0, height = 0, hmax = 1, vmax = 1, mcux = 0, mcuy = 0;
  int restart_interval = 0;
  bool frame = false;

  void read_dqt(Reader& r) {
    int len = r.u16() - 2;
    while (len > 0) {
      const int pq_tq = r.byte();
      const int pq = pq_tq >> 4, tq = pq_tq & 15;
      if (tq > 3 || pq > 1) throw JpegError("invalid DQT");
      for (int k = 0; k < 64; ++k) qt[tq][zigzag_order()[k]] = static_cast<std::uint16_t>(pq ? r.u16() : r.byte());
      qt_defined[tq] = true;
      len -= 1 + 64 * (pq ? 2 : 1);
    }
    if (len != 0) throw JpegError("DQT length mismatch");
  }

  void read_dht(Reader& r) {
    int len = r.u16() - 2;
    while (len > 0) {
      const int tc_th = r.byte();
      const int tc = tc_th >> 4, th = tc_th & 15;
      if (tc > 1 || th > 3) throw JpegError("invalid DHT");
      std::array<std::uint8_t, 16> bits{};
      int total = 0;
      for (auto& b : bits) total += b = r.byte();
      if (total > 256) throw JpegError("invalid DHT");
      std::vector<std::uint8_t> vals(static_cast<std::size_t>(total));
      for (auto& v : vals) v = r.byte();
      (tc == 0 ? dc : ac)[th].build(bits, std::move(vals));
      len -= 17 + total;
    }
    if (len != 0) throw JpegError("DHT length mismatch");
  }

  void read_sof(Reader& r) {
    if (frame) throw JpegError("multiple frames");
    const int len = r.u16();
    if (r.byte() != 8) throw JpegError("only 8-bit precision is supported");
    height = r.u16();
    width = r.u16();
    const int n = r.byte();
    if (height == 0 || width == 0) throw JpegError("zero image dimension");
    if (n != 1 && n != 3) throw JpegError("only 1 or 3 components are supported");
    if (len != 8 + 3 * n) throw JpegError("SOF length mismatch");
    comps.resize(static_cast<std::size_t>(n));
    for (auto& c : comps) {
      c.id = r.byte();
      const int hv = r.byte();
      c.h = hv >> 4;
      c.v = hv & 15;
      c.tq = r.byte();
      if (c.h < 1 || c.h > 4 || c.v < 1 || c.v > 4 || c.tq > 3) throw JpegError("invalid component");
      hmax = std::max(hmax, c.h);
      vmax = std::max(vmax, c.v);
    }
    mcux = (width + 8 * hmax - 1) / (8 * hmax);
    mcuy = (height + 8 * vmax - 1) / (8 * vmax);
    for (auto& c : comps) {
      c.plane_w = mcux * c.h * 8;
      c.plane_h = mcuy * c.v * 8;
      c.samples.assign(static_cast<std::size_t>(c.plane_w) * c.plane_h, 0);
    }
    frame = true;
  }

  void decode_block(Reader& r, Component& c, std::array<int, 64>& zz) {
    zz.fill(0);
    const HuffmanTable& d = dc[c.td];
    const HuffmanTable& a = ac[c.ta];
    if (!d.defined || !a.defined) throw JpegError("scan references undefined Huffman table");
    const int cat = decode_symbol(r, d);
    if (cat > 11) throw JpegError("invalid DC category");
    c.dc_pred += cat ? extend(r.bits(cat), cat) : 0;
    zz[0] = c.dc_pred;
    for (int k = 1; k < 64;) {
      const int sym = decode_symbol(r, a);
      const int run = sym >> 4, size = sym & 15;
      if (size == 0) {
        if (run == 15) {
          k += 16;
          continue;
        }
        break;
      }
      k += run;
      if (k > 63) throw JpegError("AC coefficient index out of range");
      zz[k++] = extend(r.bits(size), size);
    }
  }

  void read_scan(Reader& r) {
    if (!frame) throw JpegError("SOS before SOF");
    const int len = r.u16();
    const int ns = r.byte();
    if (ns < 1 || ns > 4 || len != 6 + 2 * ns) throw JpegError("invalid SOS");
    std::vector<Component*> scan;
    for (int i = 0; i < ns; ++i) {
      const int id = r.byte(), t = r.byte();
      auto it = std::find_if(comps.begin(), comps.end(), [&](const Component& c) { return c.id == id; });
      if (it == comps.end()) throw JpegError("scan references unknown component");
      it->td = t >> 4;
      it->ta = t & 15;
      if (it->td > 3 || it->ta > 3) throw JpegError("invalid table selector");
      scan.push_back(&*it);
    }
    const int ss = r.byte(), se = r.byte(), a = r.byte();
    if (ss != 0 || se != 63 || a != 0) throw JpegError("progressive JPEG is not supported");
    for (auto* c : scan) {
      if (!qt_defined[c->tq]) throw JpegError("component references undefined quantization table");
      c->dc_pred = 0;
    }

    // A single-component scan is non-interleaved: one block per MCU over the
    // component's own block grid.
    int units_x, units_y;
    if (ns == 1) {
      const Component& c = *scan[0];
      const int cw = (width * c.h + hmax - 1) / hmax, ch = (height * c.v + vmax - 1) / vmax;
      units_x = (cw + 7) / 8;
      units_y = (ch + 7) / 8;
    } else {
      units_x = mcux;
      units_y = mcuy;
    }
    std::array<FloatQTable, 4> fq{};
    for (int t = 0; t < 4; ++t) fq[t] = aan_table(qt[t]);
    std::array<int, 64> zz{}, natural{};
    const auto& order = zigzag_order();
    auto emit = [&](Component& c, int bx, int by) {
      decode_block(r, c, zz);
      for (int k = 0; k < 64; ++k) natural[order[k]] = zz[k];
      idct_block(natural, fq[c.tq], c, bx, by);
    };
    int unit = 0, expected_rst = 0;
    for (int my = 0; my < units_y; ++my)
      for (int mx = 0; mx < units_x; ++mx) {
        if (restart_interval && unit > 0 && unit % restart_interval == 0) {
          const std::uint8_t m = r.next_marker();
          if (m != 0xD0 + expected_rst) throw JpegError("missing restart marker");
          expected_rst = (expected_rst + 1) & 7;
          for (auto* c : scan) c->dc_pred = 0;
        }
        if (ns == 1) {
          emit(*scan[0], mx * 8, my * 8);
        } else {
          for (auto* c : scan)
            for (int v = 0; v < c->v; ++v)
              for (int h = 0; h < c->h; ++h) emit(*c, (mx * c->h + h) * 8, (my * c->v + v) * 8);
        }
        ++unit;
      }
  }

  Image finish() const {
    Image out(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        auto sample = [&](const Component& c) {
          const int sx = x * c.h / hmax, sy = y * c.v / vmax;
          return static_cast<double>(c.samples[static_cast<std::size_t>(sy) * c.plane_w + sx]);
        };
        if (comps.size() == 1) {
          const auto g = static_cast<std::uint8_t>(sample(comps[0]));
          out.at(x, y, 0) = out.at(x, y, 1) = out.at(x, y, 2) = g;
          continue;
        }
        const double Y = sample(comps[0]), cb = sample(comps[1]) - 128.0, cr = sample(comps[2]) - 128.0;
        out.at(x, y, 0) = clamp_to_byte(Y + 1.402 * cr);
        out.at(x, y, 1) = clamp_to_byte(Y - 0.344136286 * cb - 0.714136286 * cr);
        out.at(x, y, 2) = clamp_to_byte(Y + 1.772 * cb);
      }
    return out;
  }
};

}  // namespace

Image jpeg_decode(const std::vector<std::uint8_t>& stream) {
  if (stream.size() < 4 || stream[0] != 0xFF || stream[1] != 0xD8) throw JpegError("missing SOI marker");
  Reader r(stream);
  r.skip(2);
  Decoder d;
  bool scanned = false;
  while (true) {
    std::uint8_t m;
    if (scanned) {
      m = r.next_marker();
    } else {
      if (r.byte() != 0xFF) throw JpegError("expected marker");
      m = r.byte();
      while (m == 0xFF) m = r.byte();
    }
    switch (m) {
      case 0xD9:
        if (!scanned) throw JpegError("EOI before any scan");
        return d.finish();
      case 0xDB:
        d.read_dqt(r);
        break;
      case 0xC4:
        d.read_dht(r);
        break;
      case 0xC0:
      case 0xC1:
        d.read_sof(r);
        break;
      case 0xDD:
        if (r.u16() != 4) throw JpegError("invalid DRI");
        d.restart_interval = r.u16();
        break;
      case 0xDA:
        d.read_scan(r);
        scanned = true;
        break;
      default:
        if ((m >= 0xC2 && m <= 0xCF && m != 0xC4 && m != 0xC8 && m != 0xCC) || m == 0xC3) {
          throw JpegError("unsupported JPEG process (only baseline Huffman is supported)");
        }
        if ((m >= 0xE0 && m <= 0xEF) || m == 0xFE || m == 0xCC || (m >= 0xF0 && m <= 0xFD)) {
          const int len = r.u16();
          if (len < 2) throw JpegError("invalid segment length");
          r.skip(static_cast<std::size_t>(len - 2));
          break;
        }
        if (m >= 0xD0 && m <= 0xD7) break;
        throw JpegError("unexpected marker 0x" + std::to_string(m));
    }
  }
}

}  // namespace camda::distortion
