#pragma once

#include <cstdint>
#include <vector>

#include "camda/ad/tensor.hpp"

namespace camda::ad {

// Defaults follow the usual CycleGAN recipe (beta1 = 0.5).
struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list. Parameters without a
/// gradient are skipped for that step.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamOptions options = {});

  /// Applies one update from the parameters' current gradients. Throws
  /// NumericError on a non-finite gradient without touching any parameter.
  void step();
  void zero_grad();

  void set_lr(double lr);
  double lr() const { return options_.lr; }
  const AdamOptions& options() const { return options_; }
  std::int64_t steps() const { return step_; }
  const std::vector<Tensor<T>>& params() const { return params_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor<T>> params_;
  AdamOptions options_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::int64_t step_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace camda::ad
