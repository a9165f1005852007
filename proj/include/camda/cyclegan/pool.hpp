#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "camda/ad/tensor.hpp"

namespace camda::cyclegan {

/// History of generated images fed to the discriminators. Until full, every
/// fake is stored and returned; afterwards each query returns, with
/// probability 1/2, a stored fake (which the fresh one replaces).
template <typename T>
class ImagePool {
 public:
  ImagePool(std::size_t capacity, std::uint64_t seed);

  /// Per-sample selection over a (N, C, H, W) batch of detached fakes.
  ad::Tensor<T> query(const ad::Tensor<T>& fakes);

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::mt19937_64 rng_;
  std::vector<std::vector<T>> items_;
};

extern template class ImagePool<float>;
extern template class ImagePool<double>;

}  // namespace camda::cyclegan
