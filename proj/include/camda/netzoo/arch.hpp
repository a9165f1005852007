#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "camda/ad/ops.hpp"

namespace camda::netzoo {

enum class LayerKind { Conv, ConvTranspose, ResidualBlock };
enum class Norm { None, Batch, Instance };
enum class Activation { None, LeakyRelu, Relu, Tanh };

/// One stage of a feed-forward stack. A residual block expands to
/// pad-conv3x3-norm-relu-pad-conv3x3-norm plus the identity skip.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  ad::PadMode pad_mode = ad::PadMode::Zero;
  int output_padding = 0;  // conv_transpose only
  Norm norm = Norm::None;
  Activation activation = Activation::None;

  bool operator==(const LayerSpec&) const = default;
};

struct ArchitectureSpec {
  std::string name;
  int in_channels = 3;
  std::vector<LayerSpec> layers;

  bool operator==(const ArchitectureSpec&) const = default;
};

enum class Builtin { BD, SD, ESD, ResNet9Generator };

class ArchitectureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Baseline 70x70 PatchGAN, shallow (34x34) and extremely shallow (16x16)
/// discriminators, and the nine-block ResNet generator.
ArchitectureSpec builtin_spec(Builtin variant);
/// Parses "bd", "sd", "esd" or "resnet9" (case-insensitive).
Builtin parse_builtin(const std::string& name);
std::string builtin_name(Builtin variant);

/// ResNet encoder/decoder with `width` base channels and `blocks` residual
/// blocks; builtin_spec(ResNet9Generator) is resnet_generator_spec(64, 9).
ArchitectureSpec resnet_generator_spec(int width, int blocks, int in_channels = 3,
                                       int out_channels = 3);

/// Throws ArchitectureError if kernels/strides/channels are out of range.
void validate(const ArchitectureSpec& spec);

/// r_m = r_{m-1} + (k_m - 1) * prod_{i<m} s_i with r_0 = 1. Only plain
/// convolution stacks are supported.
int receptive_field(const ArchitectureSpec& spec);

/// Learnable parameter count. Convs feeding batch norm drop their bias and
/// the norm adds 2C affine terms; instance norm is affine-free and the conv
/// keeps its bias.
std::int64_t count_params(const ArchitectureSpec& spec);

ad::Shape predict_output_shape(const ArchitectureSpec& spec, ad::Shape input);

bool conv_has_bias(Norm norm);

}  // namespace camda::netzoo
