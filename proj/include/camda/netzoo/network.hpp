#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "camda/ad/ops.hpp"
#include "camda/netzoo/arch.hpp"

namespace camda::netzoo {

/// Named view of one state array (parameter or running-statistics buffer).
template <typename T>
struct StateEntry {
  std::string name;
  ad::Shape shape;
  std::span<T> data;
  bool is_parameter;
};

/// Parameters realized from an ArchitectureSpec plus the forward pass.
/// Single owner while training; forward under NoGradGuard is read-only
/// apart from batch-norm running statistics in train mode.
template <typename T>
class Network {
 public:
  /// Weights ~ N(0, 0.02), biases 0, batch-norm gamma ~ N(1, 0.02), beta 0.
  static Network build(const ArchitectureSpec& spec, std::uint64_t seed);

  ad::Tensor<T> forward(const ad::Tensor<T>& input, ad::NormMode mode = ad::NormMode::Train);

  const ArchitectureSpec& spec() const { return spec_; }
  std::vector<ad::Tensor<T>> parameters() const;
  std::int64_t param_total() const;
  void set_requires_grad(bool on);
  void zero_grad();

  /// Parameters followed by batch-norm buffers, in a stable order.
  std::vector<StateEntry<T>> state();

 private:
  struct Unit {
    ad::Tensor<T> weight;
    ad::Tensor<T> bias;  // undefined when suppressed by batch norm
    ad::Tensor<T> gamma;
    ad::Tensor<T> beta;
    ad::RunningStats<T> stats;
  };
  struct Layer {
    LayerSpec spec;
    std::vector<Unit> units;  // two for a residual block
  };

  ad::Tensor<T> apply_unit(const Layer& layer, Unit& unit, const ad::Tensor<T>& x,
                           ad::NormMode mode, bool transpose, Activation act);

  ArchitectureSpec spec_;
  std::vector<Layer> layers_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace camda::netzoo
