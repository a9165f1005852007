#include "camda/netzoo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "camda/ad/ops.hpp"
#include "camda/netzoo/network.hpp"

namespace camda::netzoo {

using ad::Shape;
using Tensor = ad::Tensor<double>;

GradCheckResult check_gradients(const std::string& name, const std::function<Tensor()>& loss,
                                const std::vector<Tensor>& inputs,
                                const GradCheckOptions& options) {
  for (auto t : inputs) t.zero_grad();
  ad::backward(loss());
  // Allows 1e-12 of roundoff in the loss, amplified by 1/h in the differences.
  const double floor = std::max(1e-8, 1e-12 / options.step);

  std::mt19937_64 rng(options.seed);
  GradCheckResult result{name, 0.0, 0, true};
  for (auto t : inputs) {
    std::vector<std::size_t> idx(t.numel());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.samples_per_tensor > 0 && options.samples_per_tensor < idx.size()) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.samples_per_tensor);
    }
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());

    double max_diff = 0, max_a = 0, max_n = 0;
    auto values = t.mutable_data();
    for (std::size_t i : idx) {
      const double saved = values[i];
      double plus, minus;
      {
        ad::NoGradGuard guard;
        values[i] = saved + options.step;
        plus = loss().item();
        values[i] = saved - options.step;
        minus = loss().item();
      }
      values[i] = saved;
      const double numeric = (plus - minus) / (2 * options.step);
      max_diff = std::max(max_diff, std::abs(analytic[i] - numeric));
      max_a = std::max(max_a, std::abs(analytic[i]));
      max_n = std::max(max_n, std::abs(numeric));
    }
    result.elements_checked += idx.size();
    const double scale = std::max(max_a, max_n);
    const double rel = scale < floor ? 0.0 : max_diff / scale;
    result.max_relative_error = std::max(result.max_relative_error, rel);
  }
  for (auto t : inputs) t.zero_grad();
  result.passed = result.max_relative_error < options.tolerance;
  return result;
}

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  Tensor normal(Shape s, bool grad = true, double stddev = 1.0) {
    std::normal_distribution<double> d(0.0, stddev);
    std::vector<double> v(s.numel());
    for (auto& x : v) x = d(rng_);
    return Tensor::from(s, std::move(v), grad);
  }

  // Keeps every value at least `margin` away from zero so that central
  // differences never straddle a kink.
  Tensor away_from_zero(Shape s, double margin = 0.05) {
    Tensor t = normal(s);
    for (auto& x : t.mutable_data()) {
      if (std::abs(x) < margin) x = x < 0 ? x - margin : x + margin;
    }
    return t;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

Tensor project(const Tensor& out, const Tensor& weights) { return ad::sum(ad::mul(out, weights)); }

}  // namespace

std::vector<GradCheckResult> op_gradient_suite(std::uint64_t seed) {
  Sampler s(seed);
  std::vector<GradCheckResult> results;
  auto run = [&](const std::string& name, std::function<Tensor()> f, std::vector<Tensor> in) {
    results.push_back(check_gradients(name, f, in));
  };

  {
    auto x = s.normal({2, 3, 5, 5}), w = s.normal({4, 3, 3, 3}), b = s.normal({1, 4, 1, 1});
    auto r = s.normal({2, 4, 5, 5}, false);
    run("conv2d zero pad", [=] { return project(ad::conv2d(x, w, b, {1, 1}), r); }, {x, w, b});
  }
  {
    auto x = s.normal({1, 2, 8, 8}), w = s.normal({3, 2, 4, 4}), b = s.normal({1, 3, 1, 1});
    auto r = s.normal({1, 3, 4, 4}, false);
    run("conv2d stride 2", [=] { return project(ad::conv2d(x, w, b, {2, 1}), r); }, {x, w, b});
  }
  {
    auto x = s.normal({1, 2, 8, 8}), w = s.normal({2, 2, 7, 7});
    auto r = s.normal({1, 2, 8, 8}, false);
    run("conv2d reflect pad",
        [=] { return project(ad::conv2d(x, w, Tensor{}, {1, 3, ad::PadMode::Reflect}), r); },
        {x, w});
  }
  {
    auto x = s.normal({2, 3, 4, 4}), w = s.normal({5, 3, 1, 1});
    auto r = s.normal({2, 5, 4, 4}, false);
    run("conv2d pointwise", [=] { return project(ad::conv2d(x, w, Tensor{}), r); }, {x, w});
  }
  {
    auto x = s.normal({2, 3, 4, 4}), w = s.normal({3, 2, 3, 3}), b = s.normal({1, 2, 1, 1});
    auto r = s.normal({2, 2, 8, 8}, false);
    run("conv_transpose2d",
        [=] { return project(ad::conv_transpose2d(x, w, b, {2, 1, 1}), r); }, {x, w, b});
  }
  {
    auto x = s.normal({2, 3, 4, 4}), g = s.normal({1, 3, 1, 1}), b = s.normal({1, 3, 1, 1});
    auto r = s.normal({2, 3, 4, 4}, false);
    run("batch_norm train",
        [=] {
          auto stats = ad::RunningStats<double>::init(3);
          return project(ad::batch_norm(x, g, b, stats), r);
        },
        {x, g, b});
  }
  {
    auto x = s.normal({2, 3, 4, 4}), g = s.normal({1, 3, 1, 1}), b = s.normal({1, 3, 1, 1});
    auto r = s.normal({2, 3, 4, 4}, false);
    auto stats = ad::RunningStats<double>{{0.3, -0.2, 0.1}, {1.5, 0.7, 2.0}};
    run("batch_norm eval",
        [=]() mutable {
          ad::BatchNormOptions o;
          o.mode = ad::NormMode::Eval;
          return project(ad::batch_norm(x, g, b, stats, o), r);
        },
        {x, g, b});
  }
  {
    auto x = s.normal({2, 3, 4, 4});
    auto r = s.normal({2, 3, 4, 4}, false);
    run("instance_norm", [=] { return project(ad::instance_norm(x), r); }, {x});
  }
  {
    auto x = s.away_from_zero({1, 2, 4, 4});
    auto r = s.normal({1, 2, 4, 4}, false);
    run("leaky_relu", [=] { return project(ad::leaky_relu(x, 0.2), r); }, {x});
    run("relu", [=] { return project(ad::relu(x), r); }, {x});
    run("tanh", [=] { return project(ad::tanh(x), r); }, {x});
  }
  {
    auto a = s.normal({1, 2, 3, 3}), b = s.normal({1, 2, 3, 3});
    auto r = s.normal({1, 2, 3, 3}, false);
    run("add", [=] { return project(ad::add(a, b), r); }, {a, b});
    run("sub", [=] { return project(ad::sub(a, b), r); }, {a, b});
    run("mul", [=] { return project(ad::mul(a, b), r); }, {a, b});
    run("scale", [=] { return project(ad::scale(a, -1.7), r); }, {a});
    run("sum", [=] { return ad::scale(ad::sum(ad::mul(a, a)), 0.5); }, {a});
    run("mean", [=] { return ad::mean(ad::mul(a, b)); }, {a, b});
    run("mse_loss", [=] { return ad::mse_loss(a, b); }, {a, b});
  }
  {
    auto a = s.normal({1, 2, 3, 3}), b = s.normal({1, 2, 3, 3});
    for (std::size_t i = 0; i < a.numel(); ++i) {
      const double d = a.data()[i] - b.data()[i];
      if (std::abs(d) < 0.05) a.mutable_data()[i] += d < 0 ? -0.05 : 0.05;
    }
    run("l1_loss", [=] { return ad::l1_loss(a, b); }, {a, b});
  }
  {
    auto x = s.normal({2, 2, 4, 6});
    auto r = s.normal({2, 2, 2, 3}, false);
    auto r1 = s.normal({2, 2, 1, 1}, false);
    run("avg_pool2d", [=] { return project(ad::avg_pool2d(x, 2), r); }, {x});
    run("global_avg_pool", [=] { return project(ad::global_avg_pool(x), r1); }, {x});
    auto rc = s.normal({2, 2, 2, 3}, false);
    run("crop", [=] { return project(ad::crop(x, 1, 2, 2, 3), rc); }, {x});
  }
  {
    auto z = s.normal({3, 4, 1, 1});
    const std::vector<int> labels{2, 0, 3};
    run("softmax_cross_entropy", [=] { return ad::softmax_cross_entropy(z, labels); }, {z});
  }
  {
    auto x = s.normal({2, 3, 6, 6}), w1 = s.normal({4, 3, 3, 3}, true, 0.5);
    auto g = s.normal({1, 4, 1, 1}), b = s.normal({1, 4, 1, 1});
    auto w2 = s.normal({4, 2, 3, 3}, true, 0.5), b2 = s.normal({1, 2, 1, 1});
    auto target = s.normal({2, 2, 6, 6}, false, 0.5);
    run("composite conv-bn-lrelu-convT-tanh-mse",
        [=] {
          auto stats = ad::RunningStats<double>::init(4);
          auto h = ad::conv2d(x, w1, Tensor{}, {2, 1});
          h = ad::leaky_relu(ad::batch_norm(h, g, b, stats), 0.2);
          h = ad::tanh(ad::conv_transpose2d(h, w2, b2, {2, 1, 1}));
          return ad::mse_loss(h, target);
        },
        {x, w1, g, b, w2, b2});
  }
  return results;
}

std::vector<GradCheckResult> network_gradient_suite(std::uint64_t seed,
                                                    std::size_t samples_per_tensor) {
  std::vector<GradCheckResult> results;
  for (Builtin variant : {Builtin::BD, Builtin::SD, Builtin::ESD, Builtin::ResNet9Generator}) {
    Sampler s(seed + static_cast<std::uint64_t>(variant));
    auto net = Network<double>::build(builtin_spec(variant), seed);
    const Shape in{1, 3, 32, 32};
    auto x = s.normal(in);
    auto r = s.normal(predict_output_shape(net.spec(), in), false);
    std::vector<Tensor> inputs = net.parameters();
    inputs.push_back(x);
    GradCheckOptions options;
    options.samples_per_tensor = samples_per_tensor;
    options.step = 1e-6;
    options.seed = seed;
    results.push_back(check_gradients(
        "network " + net.spec().name, [&] { return project(net.forward(x), r); }, inputs,
        options));
  }
  return results;
}

}  // namespace camda::netzoo
