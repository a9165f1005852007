#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "camda/ad/adam.hpp"
#include "camda/cyclegan/losses.hpp"
#include "camda/cyclegan/pool.hpp"
#include "camda/distortion/image.hpp"
#include "camda/netzoo/network.hpp"

namespace camda::cyclegan {

using distortion::Image;

struct TrainConfig {
  netzoo::Builtin discriminator = netzoo::Builtin::BD;
  double lambda_c = 10.0;
  double lambda_i = 0.5;
  double base_lr = 2e-4;
  int epochs_const = 100;
  int epochs_decay = 100;
  int batch_size = 1;
  int crop = 256;
  int pool_size = 50;
  std::uint64_t seed = 0;
  int generator_width = 64;
  int generator_blocks = 9;
  int checkpoint_every = 10;  // epochs; the final epoch is always saved

  int total_epochs() const { return epochs_const + epochs_decay; }
  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// base_lr for epoch < epochs_const, then linear decay
/// base_lr * (1 - (epoch - epochs_const + 1) / (epochs_decay + 1)).
double lr_schedule(int epoch, const TrainConfig& config);

/// Unordered images of one domain; no pairing is stored.
struct DomainDataset {
  std::string name;
  std::vector<Image> images;

  /// Loads every .ppm / .jpg / .jpeg file of a directory in sorted order.
  static DomainDataset load_directory(const std::filesystem::path& dir);
  int min_side() const;
  void validate() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepLosses {
  LossComponents g;
  double total = 0;
  double d_x = 0;
  double d_y = 0;
};

struct EpochLosses {
  int epoch = 0;
  double lr = 0;
  LossComponents g;  // means over the epoch's steps
  double total = 0;
  double d_x = 0;
  double d_y = 0;
};

/// G: X -> Y (pristine to distorted, the learned f-hat), F: Y -> X, with
/// patch discriminators D_X and D_Y.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  /// One generator update on the full objective, then one update of D_X and
  /// D_Y on pooled fakes. Inputs are normalized (N, 3, H, W) batches.
  StepLosses train_step(const ad::Tensor<float>& x, const ad::Tensor<float>& y, double lr);

  /// The two halves of train_step, exposed for tests.
  StepLosses generator_step(const ad::Tensor<float>& x, const ad::Tensor<float>& y, double lr);
  void discriminator_step(const ad::Tensor<float>& x, const ad::Tensor<float>& y, double lr,
                          StepLosses& losses);
  /// Full objective on a batch without updating anything.
  double generator_objective(const ad::Tensor<float>& x, const ad::Tensor<float>& y);

  struct Hooks {
    std::function<void(const EpochLosses&)> on_epoch;
    std::optional<std::filesystem::path> out_dir;  // loss CSV + checkpoints
  };
  /// Runs all configured epochs. Each epoch draws min(|X|, |Y|) random crops
  /// per domain from independent shuffles.
  void train(const DomainDataset& x, const DomainDataset& y, const Hooks& hooks = {});

  void save(const std::filesystem::path& dir);

  const TrainConfig& config() const { return config_; }
  netzoo::Network<float>& G() { return g_; }
  netzoo::Network<float>& F() { return f_; }
  netzoo::Network<float>& D_X() { return dx_; }
  netzoo::Network<float>& D_Y() { return dy_; }
  const ImagePool<float>& pool_x() const { return pool_x_; }
  const ImagePool<float>& pool_y() const { return pool_y_; }
  const std::vector<StepLosses>& history() const { return history_; }
  const std::vector<EpochLosses>& epochs() const { return epochs_; }
  int epoch() const { return epoch_; }

 private:
  ad::Tensor<float> random_crops(const DomainDataset& d, const std::vector<std::size_t>& order,
                                 std::size_t first);

  TrainConfig config_;
  netzoo::Network<float> g_, f_, dx_, dy_;
  ad::Adam<float> opt_g_, opt_d_;
  ImagePool<float> pool_x_, pool_y_;
  std::mt19937_64 rng_;
  std::vector<StepLosses> history_;
  std::vector<EpochLosses> epochs_;
  ad::Tensor<float> fake_x_, fake_y_;  // detached fakes of the latest generator step
  int epoch_ = 0;  // completed epochs
};

/// Pads each image to a multiple of 4 by reflection, applies `generator`
/// in eval mode and crops back, so any image with both sides >= 16 keeps its
/// dimensions.
Image emulate(netzoo::Network<float>& generator, const Image& image);
std::vector<Image> emulate(netzoo::Network<float>& generator, const std::vector<Image>& images);

}  // namespace camda::cyclegan
