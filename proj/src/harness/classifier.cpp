#include "camda/harness/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "camda/ad/adam.hpp"
#include "camda/cyclegan/convert.hpp"

namespace camda::harness {

using ad::Shape;
using Tensor = ad::Tensor<float>;

namespace {

Tensor normal(Shape s, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, stddev);
  std::vector<float> v(s.numel());
  for (auto& x : v) x = static_cast<float>(d(rng));
  return Tensor::from(s, std::move(v), true);
}

Tensor copy(const Tensor& t) {
  return Tensor::from(t.shape(), std::vector<float>(t.data().begin(), t.data().end()), true);
}

}  // namespace

Classifier Classifier::build(int classes, int width, std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("classifier needs at least 2 classes");
  if (width < 1) throw std::invalid_argument("classifier width must be >= 1");
  std::mt19937_64 rng(seed);
  Classifier c;
  c.classes_ = classes;
  c.width_ = width;
  int cin = 3;
  for (int b = 0; b < 3; ++b) {
    const int cout = width << b;
    Block blk;
    blk.weight = normal({cout, cin, 3, 3}, std::sqrt(2.0 / (cin * 9)), rng);
    blk.gamma = Tensor::full({1, cout, 1, 1}, 1.0f, true);
    blk.beta = Tensor::zeros({1, cout, 1, 1}, true);
    blk.stats = ad::RunningStats<float>::init(cout);
    c.blocks_.push_back(std::move(blk));
    cin = cout;
  }
  c.head_w_ = normal({classes, cin, 1, 1}, std::sqrt(1.0 / cin), rng);
  c.head_b_ = Tensor::zeros({1, classes, 1, 1}, true);
  return c;
}

Tensor Classifier::forward(const Tensor& x, ad::NormMode mode) {
  Tensor h = x;
  ad::BatchNormOptions bn;
  bn.mode = mode;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto& blk = blocks_[b];
    h = ad::conv2d(h, blk.weight, Tensor{}, {1, 1, ad::PadMode::Zero});
    h = ad::relu(ad::batch_norm(h, blk.gamma, blk.beta, blk.stats, bn));
    h = b + 1 < blocks_.size() ? ad::avg_pool2d(h, 2) : ad::global_avg_pool(h);
  }
  return ad::conv2d(h, head_w_, head_b_);
}

std::vector<int> Classifier::predict(const std::vector<Image>& images) {
  std::vector<int> out;
  out.reserve(images.size());
  ad::NoGradGuard guard;
  constexpr std::size_t chunk = 64;
  for (std::size_t i = 0; i < images.size(); i += chunk) {
    std::vector<Image> batch(images.begin() + i, images.begin() + std::min(images.size(), i + chunk));
    const Tensor logits = forward(cyclegan::normalize_batch<float>(batch), ad::NormMode::Eval);
    const auto v = logits.data();
    for (std::size_t n = 0; n < batch.size(); ++n) {
      const auto row = v.begin() + static_cast<std::ptrdiff_t>(n * classes_);
      out.push_back(static_cast<int>(std::max_element(row, row + classes_) - row));
    }
  }
  return out;
}

std::vector<Tensor> Classifier::parameters() const {
  std::vector<Tensor> p;
  for (const auto& b : blocks_) p.insert(p.end(), {b.weight, b.gamma, b.beta});
  p.insert(p.end(), {head_w_, head_b_});
  return p;
}

std::vector<float> Classifier::state() const {
  std::vector<float> s;
  for (const auto& t : parameters()) s.insert(s.end(), t.data().begin(), t.data().end());
  for (const auto& b : blocks_) {
    s.insert(s.end(), b.stats.mean.begin(), b.stats.mean.end());
    s.insert(s.end(), b.stats.var.begin(), b.stats.var.end());
  }
  return s;
}

Classifier Classifier::clone() const {
  Classifier c;
  c.classes_ = classes_;
  c.width_ = width_;
  for (const auto& b : blocks_) c.blocks_.push_back({copy(b.weight), copy(b.gamma), copy(b.beta), b.stats});
  c.head_w_ = copy(head_w_);
  c.head_b_ = copy(head_b_);
  return c;
}

namespace {

void train(Classifier& model, const LabeledDataset& data, const TrainOptions& o) {
  if (o.steps < 0 || o.batch_size < 1) throw std::invalid_argument("invalid training options");
  if (o.steps == 0) return;
  data.validate();
  if (data.classes != model.classes()) throw std::invalid_argument("dataset and model class counts differ");
  std::mt19937_64 rng(o.seed);
  ad::Adam<float> opt(model.parameters(), ad::AdamOptions{o.lr, 0.9, 0.999, 1e-8});
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  const int drop = static_cast<int>(std::lround(o.drop_at * o.steps));
  for (int step = 0; step < o.steps; ++step) {
    std::vector<Image> batch;
    std::vector<int> labels;
    for (int b = 0; b < o.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(data.images[order[cursor]]);
      labels.push_back(data.labels[order[cursor]]);
      ++cursor;
    }
    opt.set_lr(step < drop ? o.lr : o.lr * o.drop_factor);
    opt.zero_grad();
    const Tensor loss = ad::softmax_cross_entropy(
        model.forward(cyclegan::normalize_batch<float>(batch), ad::NormMode::Train), labels);
    ad::backward(loss);
    opt.step();
  }
}

}  // namespace

Classifier pretrain(const LabeledDataset& data, int width, const TrainOptions& options) {
  Classifier model = Classifier::build(data.classes, width, options.seed);
  train(model, data, options);
  return model;
}

Classifier fine_tune(const Classifier& model, const LabeledDataset& data, const TrainOptions& options) {
  Classifier tuned = model.clone();
  train(tuned, data, options);
  return tuned;
}

Evaluation evaluate(Classifier& model, const LabeledDataset& data) {
  data.validate();
  const auto pred = model.predict(data.images);
  Evaluation e;
  std::vector<int> hit(static_cast<std::size_t>(data.classes), 0);
  const auto hist = data.histogram();
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == data.labels[i]) {
      ++correct;
      ++hit[static_cast<std::size_t>(data.labels[i])];
    }
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
  for (int c = 0; c < data.classes; ++c) {
    e.per_class.push_back(hist[c] ? static_cast<double>(hit[c]) / hist[c] : 0.0);
  }
  return e;
}

}  // namespace camda::harness
