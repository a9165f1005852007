#include "camda/netzoo/arch.hpp"

#include <algorithm>
#include <cctype>

namespace camda::netzoo {

namespace {

LayerSpec conv(int c, int k, int s, int pad, Norm norm, Activation act,
               ad::PadMode mode = ad::PadMode::Zero) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.out_channels = c;
  l.kernel = k;
  l.stride = s;
  l.padding = pad;
  l.pad_mode = mode;
  l.norm = norm;
  l.activation = act;
  return l;
}

LayerSpec conv_transpose(int c, int k, int s, int pad, int output_padding, Norm norm,
                         Activation act) {
  LayerSpec l = conv(c, k, s, pad, norm, act);
  l.kind = LayerKind::ConvTranspose;
  l.output_padding = output_padding;
  return l;
}

LayerSpec residual_block(int c, Norm norm) {
  LayerSpec l = conv(c, 3, 1, 1, norm, Activation::None, ad::PadMode::Reflect);
  l.kind = LayerKind::ResidualBlock;
  return l;
}

std::int64_t conv_params(std::int64_t cin, std::int64_t cout, std::int64_t k, Norm norm) {
  std::int64_t n = cin * cout * k * k;
  if (conv_has_bias(norm)) n += cout;
  if (norm == Norm::Batch) n += 2 * cout;
  return n;
}

}  // namespace

bool conv_has_bias(Norm norm) { return norm != Norm::Batch; }

ArchitectureSpec builtin_spec(Builtin variant) {
  constexpr auto lrelu = Activation::LeakyRelu;
  switch (variant) {
    case Builtin::BD:
      return {"bd",
              3,
              {conv(64, 4, 2, 1, Norm::None, lrelu), conv(128, 4, 2, 1, Norm::Instance, lrelu),
               conv(256, 4, 2, 1, Norm::Instance, lrelu),
               conv(512, 4, 1, 1, Norm::Instance, lrelu),
               conv(1, 4, 1, 1, Norm::None, Activation::None)}};
    case Builtin::SD:
      return {"sd",
              3,
              {conv(64, 4, 2, 1, Norm::None, lrelu), conv(128, 4, 2, 1, Norm::Batch, lrelu),
               conv(256, 4, 1, 1, Norm::Batch, lrelu),
               conv(1, 4, 1, 1, Norm::None, Activation::None)}};
    case Builtin::ESD:
      return {"esd",
              3,
              {conv(64, 4, 2, 1, Norm::None, lrelu), conv(128, 4, 1, 1, Norm::Batch, lrelu),
               conv(1, 4, 1, 1, Norm::None, Activation::None)}};
    case Builtin::ResNet9Generator: {
      auto spec = resnet_generator_spec(64, 9);
      spec.name = "resnet9";
      return spec;
    }
  }
  throw ArchitectureError("unknown builtin architecture");
}

Builtin parse_builtin(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "bd") return Builtin::BD;
  if (lower == "sd") return Builtin::SD;
  if (lower == "esd") return Builtin::ESD;
  if (lower == "resnet9" || lower == "resnet9_generator") return Builtin::ResNet9Generator;
  throw ArchitectureError("unknown builtin architecture '" + name + "'");
}

std::string builtin_name(Builtin variant) { return builtin_spec(variant).name; }

ArchitectureSpec resnet_generator_spec(int width, int blocks, int in_channels, int out_channels) {
  if (width < 1 || blocks < 0) throw ArchitectureError("invalid generator width/blocks");
  constexpr auto relu = Activation::Relu;
  ArchitectureSpec spec;
  spec.name = "resnet" + std::to_string(blocks) + "_w" + std::to_string(width);
  spec.in_channels = in_channels;
  spec.layers.push_back(conv(width, 7, 1, 3, Norm::Instance, relu, ad::PadMode::Reflect));
  spec.layers.push_back(conv(2 * width, 3, 2, 1, Norm::Instance, relu));
  spec.layers.push_back(conv(4 * width, 3, 2, 1, Norm::Instance, relu));
  for (int b = 0; b < blocks; ++b) spec.layers.push_back(residual_block(4 * width, Norm::Instance));
  spec.layers.push_back(conv_transpose(2 * width, 3, 2, 1, 1, Norm::Instance, relu));
  spec.layers.push_back(conv_transpose(width, 3, 2, 1, 1, Norm::Instance, relu));
  spec.layers.push_back(
      conv(out_channels, 7, 1, 3, Norm::None, Activation::Tanh, ad::PadMode::Reflect));
  return spec;
}

void validate(const ArchitectureSpec& spec) {
  if (spec.in_channels < 1) throw ArchitectureError(spec.name + ": in_channels must be >= 1");
  if (spec.layers.empty()) throw ArchitectureError(spec.name + ": no layers");
  int channels = spec.in_channels;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string where = spec.name + " layer " + std::to_string(i) + ": ";
    if (l.kernel < 1) throw ArchitectureError(where + "kernel must be >= 1");
    if (l.stride < 1) throw ArchitectureError(where + "stride must be >= 1");
    if (l.out_channels < 1) throw ArchitectureError(where + "channels must be >= 1");
    if (l.padding < 0) throw ArchitectureError(where + "padding must be >= 0");
    if (l.kind == LayerKind::ConvTranspose) {
      if (l.pad_mode != ad::PadMode::Zero) {
        throw ArchitectureError(where + "transposed convolution supports zero padding only");
      }
      if (l.output_padding < 0 || l.output_padding >= l.stride) {
        throw ArchitectureError(where + "output padding must be in [0, stride)");
      }
    }
    if (l.kind == LayerKind::ResidualBlock && l.out_channels != channels) {
      throw ArchitectureError(where + "residual block must preserve channel count " +
                              std::to_string(channels));
    }
    channels = l.out_channels;
  }
}

int receptive_field(const ArchitectureSpec& spec) {
  validate(spec);
  long long r = 1;
  long long jump = 1;  // product of strides of all previous layers
  for (const LayerSpec& l : spec.layers) {
    if (l.kind != LayerKind::Conv) {
      throw ArchitectureError(spec.name +
                              ": receptive field recursion covers plain convolutions only");
    }
    r += static_cast<long long>(l.kernel - 1) * jump;
    jump *= l.stride;
  }
  return static_cast<int>(r);
}

std::int64_t count_params(const ArchitectureSpec& spec) {
  validate(spec);
  std::int64_t total = 0;
  std::int64_t channels = spec.in_channels;
  for (const LayerSpec& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::ConvTranspose:
        total += conv_params(channels, l.out_channels, l.kernel, l.norm);
        break;
      case LayerKind::ResidualBlock:
        total += 2 * conv_params(channels, l.out_channels, 3, l.norm);
        break;
    }
    channels = l.out_channels;
  }
  return total;
}

ad::Shape predict_output_shape(const ArchitectureSpec& spec, ad::Shape input) {
  validate(spec);
  if (input.c != spec.in_channels) {
    throw ArchitectureError(spec.name + ": expected " + std::to_string(spec.in_channels) +
                            " input channels, got " + std::to_string(input.c));
  }
  ad::Shape s = input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string where = spec.name + " layer " + std::to_string(i) + ": ";
    const int pad = l.kind == LayerKind::ResidualBlock ? 1 : l.padding;
    if (l.pad_mode == ad::PadMode::Reflect && (pad >= s.h || pad >= s.w)) {
      throw ArchitectureError(where + "input " + s.str() + " too small for reflect padding");
    }
    switch (l.kind) {
      case LayerKind::Conv:
        s.h = ad::conv_output_size(s.h, l.kernel, l.stride, l.padding);
        s.w = ad::conv_output_size(s.w, l.kernel, l.stride, l.padding);
        break;
      case LayerKind::ConvTranspose:
        s.h = ad::conv_transpose_output_size(s.h, l.kernel, l.stride, l.padding, l.output_padding);
        s.w = ad::conv_transpose_output_size(s.w, l.kernel, l.stride, l.padding, l.output_padding);
        break;
      case LayerKind::ResidualBlock:
        break;
    }
    if (s.h < 1 || s.w < 1) {
      throw ArchitectureError(where + "intermediate spatial size below 1 for input " +
                              input.str());
    }
    if (l.norm != Norm::None && s.plane() < 2 && (l.norm == Norm::Instance || s.n < 2)) {
      throw ArchitectureError(where + "normalization needs at least 2 values per channel");
    }
    s.c = l.out_channels;
  }
  return s;
}

}  // namespace camda::netzoo
