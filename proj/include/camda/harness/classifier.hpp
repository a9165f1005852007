#pragma once

#include <cstdint>
#include <vector>

#include "camda/ad/tensor.hpp"
#include "camda/ad/ops.hpp"
#include "camda/harness/synthetic.hpp"

namespace camda::harness {

/// Three conv3x3-BN-ReLU blocks (average pooling after the first two),
/// global average pooling and a linear head.
class Classifier {
 public:
  static Classifier build(int classes, int width, std::uint64_t seed);

  /// (N, 3, H, W) in [-1, 1] -> logits (N, classes, 1, 1).
  ad::Tensor<float> forward(const ad::Tensor<float>& x, ad::NormMode mode = ad::NormMode::Eval);
  std::vector<int> predict(const std::vector<Image>& images);

  std::vector<ad::Tensor<float>> parameters() const;
  /// Parameters followed by running statistics, flattened.
  std::vector<float> state() const;
  Classifier clone() const;

  int classes() const { return classes_; }
  int width() const { return width_; }

 private:
  struct Block {
    ad::Tensor<float> weight, gamma, beta;
    ad::RunningStats<float> stats;
  };
  int classes_ = 0, width_ = 0;
  std::vector<Block> blocks_;
  ad::Tensor<float> head_w_, head_b_;
};

struct TrainOptions {
  int steps = 1000;
  int batch_size = 16;
  double lr = 1e-3;
  double drop_at = 0.75;  // fraction of steps after which lr is multiplied by drop_factor
  double drop_factor = 0.1;
  std::uint64_t seed = 0;
};

/// Adam on softmax cross-entropy over random minibatches.
Classifier pretrain(const LabeledDataset& data, int width, const TrainOptions& options);
/// Continues from `model`'s weights; the input is not modified.
Classifier fine_tune(const Classifier& model, const LabeledDataset& data, const TrainOptions& options);

struct Evaluation {
  double accuracy = 0;
  std::vector<double> per_class;
};
Evaluation evaluate(Classifier& model, const LabeledDataset& data);

}  // namespace camda::harness
