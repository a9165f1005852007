#include "camda/cyclegan/pool.hpp"

#include <algorithm>

namespace camda::cyclegan {

template <typename T>
ImagePool<T>::ImagePool(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {}

template <typename T>
ad::Tensor<T> ImagePool<T>::query(const ad::Tensor<T>& fakes) {
  if (capacity_ == 0) return fakes;
  const ad::Shape s = fakes.shape();
  const std::size_t per = s.numel() / static_cast<std::size_t>(s.n);
  std::vector<T> out(fakes.data().begin(), fakes.data().end());
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int n = 0; n < s.n; ++n) {
    auto first = out.begin() + static_cast<std::ptrdiff_t>(n * per);
    std::vector<T> fresh(first, first + static_cast<std::ptrdiff_t>(per));
    if (items_.size() < capacity_) {
      items_.push_back(std::move(fresh));
      continue;
    }
    if (coin(rng_) > 0.5) {
      std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
      auto& stored = items_[pick(rng_)];
      if (stored.size() != per) throw ad::ShapeError("ImagePool: fake size changed between queries");
      std::copy(stored.begin(), stored.end(), first);
      stored = std::move(fresh);
    }
  }
  return ad::Tensor<T>::from(s, std::move(out));
}

template class ImagePool<float>;
template class ImagePool<double>;

}  // namespace camda::cyclegan
