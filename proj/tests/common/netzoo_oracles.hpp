#pragma once

#include <algorithm>

#include "camda/netzoo/arch.hpp"
#include "camda/netzoo/network.hpp"

namespace oracle {

// Receptive field by perturbation: a linear, all-ones, single-channel copy of
// the stack is probed with one-hot inputs; the width of the set of input
// positions that reach the centre output unit is the receptive field.
// Returns -1 if the row and column extents disagree.
inline int empirical_receptive_field(const camda::netzoo::ArchitectureSpec& spec, int size) {
  using namespace camda;
  netzoo::ArchitectureSpec probe = spec;
  probe.in_channels = 1;
  for (auto& l : probe.layers) {
    l.out_channels = 1;
    l.norm = netzoo::Norm::None;
    l.activation = netzoo::Activation::None;
  }
  auto net = netzoo::Network<double>::build(probe, 0);
  for (const auto& e : net.state()) {
    std::fill(e.data.begin(), e.data.end(), e.name.ends_with(".weight") ? 1.0 : 0.0);
  }
  ad::NoGradGuard guard;
  const auto out_shape = netzoo::predict_output_shape(probe, {1, 1, size, size});
  const int oy = out_shape.h / 2, ox = out_shape.w / 2;
  int rows = 0, cols = 0;
  for (int axis = 0; axis < 2; ++axis) {
    for (int pos = 0; pos < size; ++pos) {
      auto x = ad::Tensor<double>::zeros({1, 1, size, size});
      const int i = axis == 0 ? pos : size / 2, j = axis == 0 ? size / 2 : pos;
      x.mutable_data()[i * size + j] = 1.0;
      const double v = net.forward(x).at(0, 0, oy, ox);
      if (v != 0.0) (axis == 0 ? rows : cols)++;
    }
  }
  return rows == cols ? rows : -1;
}

}  // namespace oracle
