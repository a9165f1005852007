#include "camda/netzoo/network.hpp"

#include <random>

namespace camda::netzoo {

namespace {

template <typename T>
ad::Tensor<T> gaussian(ad::Shape shape, double mean, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(mean, stddev);
  std::vector<T> values(shape.numel());
  for (auto& v : values) v = static_cast<T>(dist(rng));
  return ad::Tensor<T>::from(shape, std::move(values), true);
}

template <typename T>
ad::Tensor<T> activate(const ad::Tensor<T>& x, Activation act) {
  switch (act) {
    case Activation::None: return x;
    case Activation::LeakyRelu: return ad::leaky_relu(x, 0.2);
    case Activation::Relu: return ad::relu(x);
    case Activation::Tanh: return ad::tanh(x);
  }
  return x;
}

}  // namespace

template <typename T>
Network<T> Network<T>::build(const ArchitectureSpec& spec, std::uint64_t seed) {
  validate(spec);
  Network net;
  net.spec_ = spec;
  std::mt19937_64 rng(seed);
  int channels = spec.in_channels;
  for (const LayerSpec& l : spec.layers) {
    Layer layer{l, {}};
    const int units = l.kind == LayerKind::ResidualBlock ? 2 : 1;
    for (int u = 0; u < units; ++u) {
      Unit unit;
      const int k = l.kind == LayerKind::ResidualBlock ? 3 : l.kernel;
      const ad::Shape wshape = l.kind == LayerKind::ConvTranspose
                                   ? ad::Shape{channels, l.out_channels, k, k}
                                   : ad::Shape{l.out_channels, channels, k, k};
      unit.weight = gaussian<T>(wshape, 0.0, 0.02, rng);
      if (conv_has_bias(l.norm)) {
        unit.bias = ad::Tensor<T>::zeros(ad::Shape{1, l.out_channels, 1, 1}, true);
      }
      if (l.norm == Norm::Batch) {
        unit.gamma = gaussian<T>(ad::Shape{1, l.out_channels, 1, 1}, 1.0, 0.02, rng);
        unit.beta = ad::Tensor<T>::zeros(ad::Shape{1, l.out_channels, 1, 1}, true);
        unit.stats = ad::RunningStats<T>::init(l.out_channels);
      }
      layer.units.push_back(std::move(unit));
      if (l.kind == LayerKind::ResidualBlock) channels = l.out_channels;
    }
    channels = l.out_channels;
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

template <typename T>
ad::Tensor<T> Network<T>::apply_unit(const Layer& layer, Unit& unit, const ad::Tensor<T>& x,
                                     ad::NormMode mode, bool transpose, Activation act) {
  const LayerSpec& l = layer.spec;
  ad::Tensor<T> y;
  if (transpose) {
    y = ad::conv_transpose2d(x, unit.weight, unit.bias,
                             ad::ConvTranspose2dOptions{l.stride, l.padding, l.output_padding});
  } else {
    y = ad::conv2d(x, unit.weight, unit.bias, ad::Conv2dOptions{l.stride, l.padding, l.pad_mode});
  }
  if (l.norm == Norm::Batch) {
    ad::BatchNormOptions options;
    options.mode = mode;
    y = ad::batch_norm(y, unit.gamma, unit.beta, unit.stats, options);
  } else if (l.norm == Norm::Instance) {
    y = ad::instance_norm(y);
  }
  return activate(y, act);
}

template <typename T>
ad::Tensor<T> Network<T>::forward(const ad::Tensor<T>& input, ad::NormMode mode) {
  if (input.shape().c != spec_.in_channels) {
    throw ArchitectureError(spec_.name + ": expected " + std::to_string(spec_.in_channels) +
                            " input channels, got " + input.shape().str());
  }
  ad::Tensor<T> x = input;
  for (Layer& layer : layers_) {
    switch (layer.spec.kind) {
      case LayerKind::Conv:
        x = apply_unit(layer, layer.units[0], x, mode, false, layer.spec.activation);
        break;
      case LayerKind::ConvTranspose:
        x = apply_unit(layer, layer.units[0], x, mode, true, layer.spec.activation);
        break;
      case LayerKind::ResidualBlock: {
        auto h = apply_unit(layer, layer.units[0], x, mode, false, Activation::Relu);
        h = apply_unit(layer, layer.units[1], h, mode, false, Activation::None);
        x = ad::add(x, h);
        break;
      }
    }
  }
  return x;
}

template <typename T>
std::vector<ad::Tensor<T>> Network<T>::parameters() const {
  std::vector<ad::Tensor<T>> out;
  for (const Layer& layer : layers_) {
    for (const Unit& u : layer.units) {
      for (const auto* t : {&u.weight, &u.bias, &u.gamma, &u.beta}) {
        if (t->defined()) out.push_back(*t);
      }
    }
  }
  return out;
}

template <typename T>
std::int64_t Network<T>::param_total() const {
  std::int64_t total = 0;
  for (const auto& p : parameters()) total += static_cast<std::int64_t>(p.numel());
  return total;
}

template <typename T>
void Network<T>::set_requires_grad(bool on) {
  for (auto& p : parameters()) p.set_requires_grad(on);
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto& p : parameters()) p.zero_grad();
}

template <typename T>
std::vector<StateEntry<T>> Network<T>::state() {
  std::vector<StateEntry<T>> params;
  std::vector<StateEntry<T>> buffers;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& layer = layers_[i];
    for (std::size_t u = 0; u < layer.units.size(); ++u) {
      Unit& unit = layer.units[u];
      std::string prefix = "layer" + std::to_string(i);
      if (layer.units.size() > 1) prefix += u == 0 ? ".a" : ".b";
      auto add = [&](const char* name, ad::Tensor<T>& t) {
        if (t.defined()) params.push_back({prefix + "." + name, t.shape(), t.mutable_data(), true});
      };
      add("weight", unit.weight);
      add("bias", unit.bias);
      add("gamma", unit.gamma);
      add("beta", unit.beta);
      if (!unit.stats.mean.empty()) {
        const ad::Shape s{1, static_cast<int>(unit.stats.mean.size()), 1, 1};
        buffers.push_back({prefix + ".running_mean", s, unit.stats.mean, false});
        buffers.push_back({prefix + ".running_var", s, unit.stats.var, false});
      }
    }
  }
  params.insert(params.end(), buffers.begin(), buffers.end());
  return params;
}

template class Network<float>;
template class Network<double>;

}  // namespace camda::netzoo
