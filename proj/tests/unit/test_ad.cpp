#include <cmath>
#include <limits>
#include <random>

#include "camda/ad/adam.hpp"
#include "camda/ad/ops.hpp"
#include "camda/netzoo/gradcheck.hpp"
#include "doctest.h"

using namespace camda::ad;
using T = Tensor<double>;

namespace {

T random_tensor(Shape s, std::mt19937_64& rng, bool grad = false) {
  std::normal_distribution<double> d(0, 1);
  std::vector<double> v(s.numel());
  for (auto& x : v) x = d(rng);
  return T::from(s, std::move(v), grad);
}

double dot(const T& a, const T& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a.data()[i] * b.data()[i];
  return acc;
}

int reflect(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

// Direct-summation convolution used as an oracle for the im2col path.
T naive_conv(const T& x, const T& w, const T& b, int stride, int pad, bool reflect_pad) {
  const Shape xs = x.shape(), ws = w.shape();
  const int oh = (xs.h + 2 * pad - ws.h) / stride + 1;
  const int ow = (xs.w + 2 * pad - ws.w) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(xs.n) * ws.n * oh * ow);
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double acc = b.defined() ? b.data()[o] : 0.0;
          for (int c = 0; c < xs.c; ++c)
            for (int ki = 0; ki < ws.h; ++ki)
              for (int kj = 0; kj < ws.w; ++kj) {
                int y = i * stride - pad + ki, z = j * stride - pad + kj;
                if (reflect_pad) {
                  y = reflect(y, xs.h);
                  z = reflect(z, xs.w);
                } else if (y < 0 || y >= xs.h || z < 0 || z >= xs.w) {
                  continue;
                }
                acc += x.at(n, c, y, z) * w.at(o, c, ki, kj);
              }
          out[((static_cast<std::size_t>(n) * ws.n + o) * oh + i) * ow + j] = acc;
        }
  return T::from({xs.n, ws.n, oh, ow}, out);
}

}  // namespace

TEST_CASE("conv2d worked examples") {
  auto x = T::from({1, 1, 2, 2}, {1, 2, 3, 4});
  auto ones = T::full({1, 1, 2, 2}, 1.0);
  auto y = conv2d(x, ones, T{});
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == 10.0);

  auto id = T::from({1, 1, 1, 1}, {1.0});
  auto same = conv2d(x, id, T{});
  CHECK(same.shape() == x.shape());
  for (std::size_t i = 0; i < 4; ++i) CHECK(same.data()[i] == x.data()[i]);

  auto big = T::zeros({1, 1, 4, 4});
  auto k4 = T::full({1, 1, 4, 4}, 1.0);
  CHECK(conv2d(big, k4, T{}, {2, 1}).shape() == Shape{1, 1, 2, 2});
}

TEST_CASE("conv2d matches direct summation for zero and reflect padding") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 12; ++trial) {
    const int k = 1 + trial % 4;
    const int stride = 1 + trial % 2;
    const int pad = trial % 3 == 0 ? 0 : std::min(k / 2 + 1, 3);
    const bool refl = trial % 2 == 1 && pad > 0;
    auto x = random_tensor({2, 3, 7, 6}, rng);
    auto w = random_tensor({4, 3, k, k}, rng);
    auto b = random_tensor({1, 4, 1, 1}, rng);
    auto got = conv2d(x, w, b, {stride, pad, refl ? PadMode::Reflect : PadMode::Zero});
    auto want = naive_conv(x, w, b, stride, pad, refl);
    REQUIRE(got.shape() == want.shape());
    for (std::size_t i = 0; i < got.numel(); ++i) CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d rejects bad geometry") {
  auto x = T::zeros({1, 3, 4, 4});
  CHECK_THROWS_AS(conv2d(x, T::zeros({2, 2, 3, 3}), T{}), ShapeError);
  CHECK_THROWS_AS(conv2d(x, T::zeros({2, 3, 7, 7}), T{}), ShapeError);
  CHECK_THROWS_AS(conv2d(x, T::zeros({2, 3, 3, 3}), T{}, {0, 0}), ShapeError);
  CHECK_THROWS_AS(conv2d(x, T::zeros({2, 3, 3, 3}), T{}, {1, 4, PadMode::Reflect}), ShapeError);
}

TEST_CASE("conv_transpose2d examples") {
  auto x = T::from({1, 1, 2, 2}, {1, 2, 3, 4});
  auto id = T::from({1, 1, 1, 1}, {1.0});
  auto same = conv_transpose2d(x, id, T{});
  for (std::size_t i = 0; i < 4; ++i) CHECK(same.data()[i] == x.data()[i]);

  auto up = conv_transpose2d(x, T::full({1, 1, 2, 2}, 1.0), T{}, {2, 0, 0});
  REQUIRE(up.shape() == Shape{1, 1, 4, 4});
  const double expect[16] = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  for (int i = 0; i < 16; ++i) CHECK(up.data()[i] == expect[i]);

  auto g = conv_transpose2d(T::zeros({1, 8, 4, 4}), T::zeros({8, 2, 3, 3}), T{}, {2, 1, 1});
  CHECK(g.shape() == Shape{1, 2, 8, 8});
  CHECK_THROWS_AS(conv_transpose2d(T::zeros({1, 3, 4, 4}), T::zeros({2, 2, 3, 3}), T{}), ShapeError);
}

TEST_CASE("conv2d and conv_transpose2d are adjoint") {
  std::mt19937_64 rng(11);
  struct Case { int h, k, s, p, op; };
  for (Case c : {Case{8, 3, 2, 1, 1}, Case{7, 3, 2, 1, 0}, Case{6, 4, 2, 1, 0}, Case{5, 3, 1, 1, 0},
                 Case{9, 1, 1, 0, 0}}) {
    auto x = random_tensor({2, 3, c.h, c.h}, rng);
    auto w = random_tensor({4, 3, c.k, c.k}, rng);
    auto cx = conv2d(x, w, T{}, {c.s, c.p});
    auto y = random_tensor(cx.shape(), rng);
    auto ty = conv_transpose2d(y, w, T{}, {c.s, c.p, c.op});
    REQUIRE(ty.shape() == x.shape());
    const double lhs = dot(cx, y), rhs = dot(x, ty);
    CHECK(std::abs(lhs - rhs) <= 1e-6 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("batch_norm behaviour") {
  auto gamma = T::full({1, 2, 1, 1}, 1.0), beta = T::zeros({1, 2, 1, 1});
  SUBCASE("already standardized input passes through") {
    auto x = T::from({1, 2, 2, 2}, {1, -1, 1, -1, -1, 1, -1, 1});
    auto stats = RunningStats<double>::init(2);
    auto y = batch_norm(x, gamma, beta, stats, {NormMode::Train, 0.1, 0.0});
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(y.data()[i] - x.data()[i]) < 1e-6);
  }
  SUBCASE("constant channel goes to zero") {
    auto x = T::full({2, 2, 3, 3}, 4.5);
    auto stats = RunningStats<double>::init(2);
    auto y = batch_norm(x, gamma, beta, stats);
    for (double v : y.data()) CHECK(std::abs(v) < 1e-9);
  }
  SUBCASE("random input is standardized per channel; running stats update") {
    std::mt19937_64 rng(3);
    auto x = random_tensor({4, 2, 5, 5}, rng);
    for (auto& v : x.mutable_data()) v = 3 * v + 2;
    auto stats = RunningStats<double>::init(2);
    auto y = batch_norm(x, gamma, beta, stats, {NormMode::Train, 0.1, 1e-5});
    for (int c = 0; c < 2; ++c) {
      double m = 0, v = 0;
      for (int n = 0; n < 4; ++n)
        for (int i = 0; i < 25; ++i) m += y.at(n, c, i / 5, i % 5);
      m /= 100;
      for (int n = 0; n < 4; ++n)
        for (int i = 0; i < 25; ++i) v += std::pow(y.at(n, c, i / 5, i % 5) - m, 2);
      v /= 100;
      CHECK(std::abs(m) < 1e-9);
      CHECK(std::abs(v - 1) < 1e-3);
      CHECK(stats.mean[c] != 0.0);
    }
    auto e1 = batch_norm(x, gamma, beta, stats, {NormMode::Eval, 0.1, 1e-5});
    auto before = stats.mean;
    auto e2 = batch_norm(x, gamma, beta, stats, {NormMode::Eval, 0.1, 1e-5});
    CHECK(stats.mean == before);
    for (std::size_t i = 0; i < e1.numel(); ++i) CHECK(e1.data()[i] == e2.data()[i]);
  }
  SUBCASE("errors") {
    auto stats = RunningStats<double>::init(2);
    CHECK_THROWS_AS(batch_norm(T::full({1, 2, 2, 2}, 1.0), gamma, beta, stats, {NormMode::Train, 0.1, 0.0}),
                    NumericError);
    CHECK_THROWS_AS(batch_norm(T::zeros({1, 2, 1, 1}), gamma, beta, stats), ShapeError);
    CHECK_THROWS_AS(batch_norm(T::zeros({1, 3, 2, 2}), gamma, beta, stats), ShapeError);
  }
}

TEST_CASE("instance_norm") {
  std::mt19937_64 rng(5);
  auto x = random_tensor({1, 3, 4, 4}, rng);
  auto stats = RunningStats<double>::init(3);
  auto bn = batch_norm(x, T::full({1, 3, 1, 1}, 1.0), T::zeros({1, 3, 1, 1}), stats);
  auto in = instance_norm(x);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(in.data()[i] == doctest::Approx(bn.data()[i]).epsilon(1e-12));

  auto flat = instance_norm(T::full({2, 2, 3, 3}, -7.0));
  for (double v : flat.data()) CHECK(v == 0.0);

  auto x2 = random_tensor({2, 2, 4, 4}, rng);
  auto scaled = scale(x2, 37.5);
  auto a = instance_norm(x2, 1e-9), b = instance_norm(scaled, 1e-9);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a.data()[i] - b.data()[i]) < 1e-5);

  CHECK_THROWS_AS(instance_norm(T::full({1, 1, 2, 2}, 1.0), 0.0), NumericError);
}

TEST_CASE("activations") {
  CHECK(leaky_relu(T::scalar(-1.0), 0.2).item() == doctest::Approx(-0.2));
  CHECK(tanh(T::scalar(0.0)).item() == 0.0);
  CHECK(relu(T::scalar(-3.0)).item() == 0.0);

  auto x = T::scalar(-2.0, true);
  backward(sum(leaky_relu(x, 0.2)));
  const double h = 1e-4;
  const double fd = (leaky_relu(T::scalar(-2.0 + h), 0.2).item() - leaky_relu(T::scalar(-2.0 - h), 0.2).item()) / (2 * h);
  CHECK(fd == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(x.grad()[0] == doctest::Approx(fd).epsilon(1e-9));

  auto z = T::scalar(0.0, true);
  backward(sum(leaky_relu(z, 0.2)));
  CHECK(z.grad()[0] == 1.0);
}

TEST_CASE("losses") {
  auto x = T::from({1, 1, 1, 2}, {0.3, -1.2});
  CHECK(mse_loss(x, x).item() == 0.0);
  CHECK(l1_loss(x, x).item() == 0.0);
  auto a = T::from({1, 1, 1, 2}, {0, 2}), b = T::from({1, 1, 1, 2}, {1, 0});
  CHECK(mse_loss(a, b).item() == doctest::Approx(2.5));
  CHECK(l1_loss(a, b).item() == doctest::Approx(1.5));
  CHECK_THROWS_AS(mse_loss(a, T::zeros({1, 1, 2, 1})), ShapeError);
  CHECK_THROWS_AS(l1_loss(a, T::zeros({1, 1, 1, 3})), ShapeError);
}

TEST_CASE("backward semantics") {
  SUBCASE("sum gives all-ones gradient") {
    auto x = T::zeros({1, 1, 2, 2}, true);
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  SUBCASE("linear mse closed form") {
    std::mt19937_64 rng(1);
    auto x = random_tensor({1, 1, 3, 4}, rng);
    auto y = random_tensor({1, 1, 3, 4}, rng);
    auto w = T::from({1, 1, 1, 1}, {0.7}, true);
    backward(mse_loss(conv2d(x, w, T{}), y));
    double expect = 0;
    for (std::size_t i = 0; i < x.numel(); ++i) expect += 2 * x.data()[i] * (0.7 * x.data()[i] - y.data()[i]);
    expect /= static_cast<double>(x.numel());
    CHECK(w.grad()[0] == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("gradients accumulate across uses") {
    auto x = T::from({1, 1, 1, 2}, {1.0, 2.0}, true);
    backward(add(sum(x), sum(scale(x, 3.0))));
    CHECK(x.grad()[0] == 4.0);
    CHECK(x.grad()[1] == 4.0);
  }
  SUBCASE("errors") {
    auto x = T::zeros({1, 1, 2, 2}, true);
    CHECK_THROWS_AS(backward(scale(x, 2.0)), TapeError);
    auto loss = sum(x);
    backward(loss);
    CHECK_THROWS_AS(backward(loss), TapeError);
    CHECK_THROWS_AS(backward(sum(T::zeros({1, 1, 2, 2}))), TapeError);
  }
  SUBCASE("no-grad mode does not record") {
    auto x = T::zeros({1, 1, 2, 2}, true);
    NoGradGuard guard;
    auto y = sum(x);
    CHECK_FALSE(y.requires_grad());
    CHECK(Tape<double>::active().size() == 0);
  }
}

TEST_CASE("checked mode rejects non-finite outputs") {
  auto x = T::from({1, 1, 1, 2}, {1.0, std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(scale(x, 1.0), NumericError);
  set_checked_mode(false);
  CHECK_NOTHROW(scale(x, 1.0));
  set_checked_mode(true);
}

TEST_CASE("adam") {
  SUBCASE("zero learning rate leaves parameters unchanged") {
    auto p = T::from({1, 1, 1, 3}, {1.0, -2.0, 0.5}, true);
    Adam<double> opt({p}, {0.0, 0.5, 0.999, 1e-8});
    for (int i = 0; i < 3; ++i) {
      for (auto& g : p.mutable_grad()) g = 0.3;
      opt.step();
    }
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == -2.0);
    CHECK(opt.steps() == 3);
  }
  SUBCASE("beta 0 reduces to sign descent") {
    auto p = T::scalar(1.0, true);
    Adam<double> opt({p}, {0.1, 0.0, 0.0, 0.0});
    for (int i = 1; i <= 5; ++i) {
      p.mutable_grad()[0] = 1.0;
      opt.step();
      CHECK(p.item() == doctest::Approx(1.0 - 0.1 * i).epsilon(1e-12));
    }
  }
  SUBCASE("first step magnitude is lr after bias correction") {
    for (double g : {1e-3, 0.7, -25.0}) {
      auto p = T::scalar(0.0, true);
      Adam<double> opt({p}, {0.01, 0.5, 0.999, 1e-8});
      p.mutable_grad()[0] = g;
      opt.step();
      CHECK(std::abs(p.item()) == doctest::Approx(0.01).epsilon(1e-4));
    }
  }
  SUBCASE("non-finite gradient aborts") {
    auto p = T::scalar(0.0, true);
    Adam<double> opt({p});
    p.mutable_grad()[0] = std::nan("");
    CHECK_THROWS_AS(opt.step(), NumericError);
    CHECK(p.item() == 0.0);
  }
}

TEST_CASE("determinism of forward and backward") {
  auto run = [] {
    std::mt19937_64 rng(42);
    auto x = random_tensor({1, 3, 8, 8}, rng, true);
    auto w = random_tensor({4, 3, 3, 3}, rng, true);
    auto y = instance_norm(conv2d(x, w, T{}, {2, 1}));
    backward(mean(mul(y, y)));
    std::vector<double> out(w.grad().begin(), w.grad().end());
    out.insert(out.end(), x.grad().begin(), x.grad().end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("finite-difference suite over every op") {
  for (const auto& r : camda::netzoo::op_gradient_suite(0)) {
    INFO(r.name << " rel=" << r.max_relative_error);
    CHECK(r.passed);
    CHECK(r.elements_checked > 0);
  }
}
