#include "camda/cyclegan/convert.hpp"

#include <cmath>

namespace camda::cyclegan {

template <typename T>
ad::Tensor<T> normalize_batch(const std::vector<Image>& images) {
  if (images.empty()) throw ad::ShapeError("normalize_batch: no images");
  const int w = images[0].width, h = images[0].height;
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  std::vector<T> v(images.size() * 3 * plane);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    if (img.width != w || img.height != h) throw ad::ShapeError("normalize_batch: images differ in size");
    for (std::size_t p = 0; p < plane; ++p)
      for (int c = 0; c < 3; ++c) {
        v[(n * 3 + c) * plane + p] = static_cast<T>(img.rgb[p * 3 + c]) * T(2) / T(255) - T(1);
      }
  }
  return ad::Tensor<T>::from({static_cast<int>(images.size()), 3, h, w}, std::move(v));
}

template <typename T>
ad::Tensor<T> normalize_image(const Image& image) {
  return normalize_batch<T>({image});
}

template <typename T>
Image denormalize(const ad::Tensor<T>& t, int index) {
  const ad::Shape s = t.shape();
  if (s.c != 3 || index < 0 || index >= s.n) throw ad::ShapeError("denormalize: expected (N, 3, H, W), got " + s.str());
  Image img(s.w, s.h);
  const std::size_t plane = s.plane();
  const auto d = t.data();
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) {
      const double v = d[(static_cast<std::size_t>(index) * 3 + c) * plane + p];
      img.rgb[p * 3 + c] = distortion::clamp_to_byte((v + 1.0) * 127.5);
    }
  return img;
}

template ad::Tensor<float> normalize_image<float>(const Image&);
template ad::Tensor<double> normalize_image<double>(const Image&);
template ad::Tensor<float> normalize_batch<float>(const std::vector<Image>&);
template ad::Tensor<double> normalize_batch<double>(const std::vector<Image>&);
template Image denormalize<float>(const ad::Tensor<float>&, int);
template Image denormalize<double>(const ad::Tensor<double>&, int);

}  // namespace camda::cyclegan
