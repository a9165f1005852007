#include <cctype>
#include <fstream>
#include <iterator>

#include "camda/distortion/image.hpp"

namespace camda::distortion {

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) throw ImageError("malformed PPM header");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1 << 20) throw ImageError("PPM dimension too large");
    }
    return static_cast<int>(v);
  }

  std::size_t pos_ = 0;

 private:
  const std::vector<std::uint8_t>& bytes_;
};

}  // namespace

Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ImageError("not a binary PPM (P6)");
  HeaderReader r(bytes);
  r.pos_ = 2;
  const int w = r.number(), h = r.number(), maxval = r.number();
  if (maxval != 255) throw ImageError("only maxval 255 is supported, got " + std::to_string(maxval));
  if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_])) throw ImageError("malformed PPM header");
  ++r.pos_;
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - r.pos_ < need) throw ImageError("truncated PPM pixel data");
  return Image(w, h, std::vector<std::uint8_t>(bytes.begin() + r.pos_, bytes.begin() + r.pos_ + need));
}

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_ppm(bytes);
  } catch (const ImageError& e) {
    throw ImageError(path.string() + ": " + e.what());
  }
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  const auto bytes = encode_ppm(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("write failed for " + path.string());
}

}  // namespace camda::distortion
