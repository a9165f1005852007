#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "camda/ad/ops.hpp"
#include "camda/cyclegan/checkpoint.hpp"
#include "camda/cyclegan/convert.hpp"
#include "camda/cyclegan/losses.hpp"
#include "camda/cyclegan/pool.hpp"
#include "camda/cyclegan/trainer.hpp"
#include "camda/distortion/camera.hpp"
#include "camda/distortion/filters.hpp"
#include "doctest.h"

using namespace camda;
using namespace camda::cyclegan;
namespace fs = std::filesystem;
using T = ad::Tensor<double>;

namespace {

std::vector<std::vector<float>> snapshot(netzoo::Network<float>& net, bool parameters_only = false) {
  std::vector<std::vector<float>> out;
  for (const auto& e : net.state()) {
    if (!parameters_only || e.is_parameter) out.emplace_back(e.data.begin(), e.data.end());
  }
  return out;
}

std::vector<std::vector<float>> params(netzoo::Network<float>& net) { return snapshot(net, true); }

TrainConfig tiny_config(std::uint64_t seed) {
  TrainConfig c;
  c.discriminator = netzoo::Builtin::ESD;
  c.generator_width = 4;
  c.generator_blocks = 1;
  c.crop = 16;
  c.epochs_const = 1;
  c.epochs_decay = 1;
  c.pool_size = 4;
  c.seed = seed;
  return c;
}

struct Batch {
  ad::Tensor<float> x, y;
};

Batch random_batch(std::uint64_t seed, int side = 16) {
  auto imgs = distortion::synthetic_corpus(2, side, side, seed);
  return {normalize_image(imgs[0]), normalize_image(distortion::awgn(imgs[1], 15, seed))};
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("camda_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("normalize and denormalize") {
  distortion::Image img(3, 1, std::vector<std::uint8_t>{0, 0, 0, 255, 255, 255, 128, 128, 128});
  auto t = normalize_image<double>(img);
  CHECK(t.shape() == ad::Shape{1, 3, 1, 3});
  CHECK(t.at(0, 0, 0, 0) == -1.0);
  CHECK(t.at(0, 1, 0, 1) == 1.0);
  CHECK(t.at(0, 2, 0, 2) == doctest::Approx(2.0 * 128 / 255 - 1));
  CHECK(t.at(0, 2, 0, 2) == doctest::Approx(0.00392).epsilon(1e-3));
  CHECK(denormalize(t) == img);

  auto corpus = distortion::synthetic_corpus(3, 20, 12, 4);
  auto batch = normalize_batch<float>(corpus);
  CHECK(batch.shape() == ad::Shape{3, 3, 12, 20});
  for (int i = 0; i < 3; ++i) CHECK(denormalize(batch, i) == corpus[i]);

  auto out_of_range = T::full({1, 3, 2, 2}, 3.0);
  auto img2 = denormalize(out_of_range);
  CHECK(std::all_of(img2.rgb.begin(), img2.rgb.end(), [](auto v) { return v == 255; }));
}

TEST_CASE("lsgan losses") {
  CHECK(lsgan_d_loss(T::full({1, 1, 3, 3}, 1), T::zeros({1, 1, 3, 3})).item() == 0.0);
  CHECK(lsgan_d_loss(T::full({1, 1, 3, 3}, 0.5), T::full({1, 1, 3, 3}, 0.5)).item() ==
        doctest::Approx(0.25));
  CHECK(lsgan_g_loss(T::full({2, 1, 4, 4}, 1)).item() == 0.0);
  CHECK(lsgan_g_loss(T::zeros({2, 1, 4, 4})).item() == 1.0);
}

TEST_CASE("cycle and identity losses") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  std::vector<double> vx(48), vy(48);
  for (auto& v : vx) v = d(rng);
  for (auto& v : vy) v = d(rng);
  auto x = T::from({1, 3, 4, 4}, vx), y = T::from({1, 3, 4, 4}, vy);
  auto x_off = ad::add(x, T::full(x.shape(), 0.1));
  CHECK(cycle_loss(x, x, y, y).item() == 0.0);
  CHECK(cycle_loss(x, x_off, y, y).item() == doctest::Approx(0.1));
  CHECK(cycle_loss(x, x_off, y, y).item() == cycle_loss(y, y, x, x_off).item());

  auto y_off = ad::add(y, T::full(y.shape(), 0.2));
  CHECK(identity_loss(y, y, x, x).item() == 0.0);
  CHECK(identity_loss(y_off, y, x, x).item() == doctest::Approx(0.2));
}

TEST_CASE("full objective is the weighted sum") {
  CHECK(full_objective(LossComponents{0, 0, 0, 0}, 10, 0.5) == 0.0);
  CHECK(full_objective(LossComponents{1, 1, 1, 1}, 10, 0.5) == 12.5);
  CHECK(full_objective(LossComponents{0.3, 0.7, 5, 9}, 0, 0) == 1.0);

  const LossComponents c{0.25, 0.5, 0.125, 2.0};
  const double base = full_objective(c, 0, 0);
  for (auto [lc, li] : {std::pair{1.0, 2.0}, {10.0, 0.5}, {4.0, 8.0}}) {
    CHECK(full_objective(c, lc, li) == doctest::Approx(base + lc * c.cycle + li * c.identity));
    CHECK(full_objective(c, 2 * lc, li) - full_objective(c, lc, li) == doctest::Approx(lc * c.cycle));
    CHECK(full_objective(c, lc, 2 * li) - full_objective(c, lc, li) == doctest::Approx(li * c.identity));
  }

  auto s = [](double v) { return T::scalar(v); };
  CHECK(full_objective(s(1), s(1), s(1), s(1), 10, 0.5).item() == 12.5);
  CHECK(full_objective(s(1), s(1), s(1), T{}, 10, 0.0).item() == 12.0);
}

TEST_CASE("zero identity weight removes its gradient") {
  auto w = T::full({1, 3, 2, 2}, 0.3, true);
  auto v = T::full({1, 3, 2, 2}, 0.5, true);
  auto y = T::zeros({1, 3, 2, 2});
  auto id = identity_loss(ad::add(y, w), y, y, y);
  ad::backward(full_objective(lsgan_g_loss(v), T::scalar(0), T::scalar(0), id, 10, 0.0));
  CHECK(v.has_grad());
  CHECK((!w.has_grad() || std::all_of(w.grad().begin(), w.grad().end(), [](double g) { return g == 0; })));
}

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  CHECK(lr_schedule(0, c) == 2e-4);
  for (int e = 0; e < 100; ++e) CHECK(lr_schedule(e, c) == 2e-4);
  for (int e = 101; e < 200; ++e) CHECK(lr_schedule(e, c) <= lr_schedule(e - 1, c));
  CHECK(lr_schedule(199, c) == doctest::Approx(2e-4 / 101));
  CHECK(lr_schedule(199, c) < 2e-6);
  CHECK(lr_schedule(199, c) > 0);
  CHECK_THROWS_AS(lr_schedule(200, c), std::out_of_range);
  CHECK_THROWS_AS(lr_schedule(-1, c), std::out_of_range);
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.crop = 30;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.lambda_c = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.epochs_const = 0;
  c.epochs_decay = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("image pool") {
  auto fake = [](double v) { return T::full({1, 1, 2, 2}, v); };
  ImagePool<double> passthrough(0, 1);
  for (int i = 0; i < 5; ++i) CHECK(passthrough.query(fake(i)).at(0, 0, 0, 0) == i);
  CHECK(passthrough.size() == 0);

  ImagePool<double> pool(10, 2);
  for (int i = 0; i < 10; ++i) CHECK(pool.query(fake(i)).at(0, 0, 0, 0) == i);
  CHECK(pool.size() == 10);

  int stored = 0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const double v = 100.0 + i;
    if (pool.query(fake(v)).at(0, 0, 0, 0) != v) ++stored;
  }
  CHECK(pool.size() == 10);
  CHECK(std::abs(stored / double(draws) - 0.5) < 0.05);

  // Per-sample selection keeps batch shape.
  ImagePool<double> batch_pool(3, 4);
  CHECK(batch_pool.query(T::zeros({5, 3, 4, 4})).shape() == ad::Shape{5, 3, 4, 4});
  CHECK(batch_pool.size() == 3);
}

TEST_CASE("generator and discriminator steps update disjoint parameters") {
  Trainer t(tiny_config(5));
  auto b = random_batch(1);
  // Batch-norm running buffers of the discriminators do move during the
  // generator step (train-mode forward); only learnable weights are compared.
  auto dx = params(t.D_X()), dy = params(t.D_Y()), g = params(t.G()), f = params(t.F());
  StepLosses losses = t.generator_step(b.x, b.y, 1e-3);
  CHECK(params(t.D_X()) == dx);
  CHECK(params(t.D_Y()) == dy);
  CHECK(params(t.G()) != g);
  CHECK(params(t.F()) != f);

  g = params(t.G());
  f = params(t.F());
  t.discriminator_step(b.x, b.y, 1e-3, losses);
  CHECK(params(t.G()) == g);
  CHECK(params(t.F()) == f);
  CHECK(params(t.D_X()) != dx);
  CHECK(params(t.D_Y()) != dy);
  CHECK(std::isfinite(losses.d_x));
  CHECK(std::isfinite(losses.d_y));
}

TEST_CASE("zero loss leaves generators unchanged") {
  TrainConfig c = tiny_config(6);
  c.lambda_c = 0;
  c.lambda_i = 0;
  Trainer t(c);
  // Constant all-ones discriminators: the adversarial terms are exactly zero.
  for (auto* d : {&t.D_X(), &t.D_Y()}) {
    auto params = d->parameters();
    auto& w = params[params.size() - 2];
    auto& bias = params.back();
    std::fill(w.mutable_data().begin(), w.mutable_data().end(), 0.0f);
    std::fill(bias.mutable_data().begin(), bias.mutable_data().end(), 1.0f);
  }
  auto b = random_batch(2);
  auto g = snapshot(t.G()), f = snapshot(t.F());
  StepLosses s = t.generator_step(b.x, b.y, 1e-2);
  CHECK(s.total == 0.0);
  CHECK(snapshot(t.G()) == g);
  CHECK(snapshot(t.F()) == f);
}

TEST_CASE("a tiny generator step descends the objective") {
  int descended = 0;
  const int trials = 20;
  for (int seed = 0; seed < trials; ++seed) {
    Trainer t(tiny_config(100 + seed));
    auto b = random_batch(200 + seed);
    const double before = t.generator_objective(b.x, b.y);
    t.generator_step(b.x, b.y, 1e-6);
    if (t.generator_objective(b.x, b.y) < before) ++descended;
  }
  CHECK(descended >= 18);
}

TEST_CASE("training is deterministic per seed") {
  auto run = [] {
    Trainer t(tiny_config(9));
    std::vector<double> seq;
    for (int i = 0; i < 3; ++i) {
      auto b = random_batch(30 + i);
      auto s = t.train_step(b.x, b.y, 2e-4);
      seq.insert(seq.end(), {s.total, s.d_x, s.d_y});
    }
    return seq;
  };
  CHECK(run() == run());
}

TEST_CASE("one epoch smoke run writes one checkpoint") {
  auto corpus = distortion::synthetic_corpus(16, 64, 64, 11);
  DomainDataset x{"x", {corpus.begin(), corpus.begin() + 8}}, y{"y", {}};
  for (int i = 8; i < 16; ++i) y.images.push_back(distortion::awgn(corpus[i], 15, i));
  TrainConfig c = tiny_config(12);
  c.discriminator = netzoo::Builtin::SD;
  c.crop = 64;
  c.epochs_const = 1;
  c.epochs_decay = 0;
  auto dir = scratch_dir("smoke");
  int epochs_seen = 0;
  Trainer t(c);
  t.train(x, y, {[&](const EpochLosses& e) {
                   ++epochs_seen;
                   CHECK(e.epoch == 0);
                   CHECK(e.lr == 2e-4);
                 },
                 dir});
  CHECK(epochs_seen == 1);
  CHECK(t.history().size() == 8);
  CHECK(t.epoch() == 1);
  std::vector<fs::path> ckpts;
  for (const auto& e : fs::directory_iterator(dir / "checkpoints")) {
    if (e.is_directory()) ckpts.push_back(e.path());
  }
  REQUIRE(ckpts.size() == 1);
  CHECK(ckpts[0].filename() == "epoch_0001");
  auto names = checkpoint_networks(ckpts[0]);
  CHECK(names == std::vector<std::string>{"G", "F", "D_X", "D_Y"});
  CHECK(checkpoint_metadata(ckpts[0]).at("epoch") == "1");

  std::ifstream csv(dir / "loss.csv");
  std::string header, row, extra;
  std::getline(csv, header);
  CHECK(header == "epoch,L_GAN_G,L_GAN_F,L_c,L_i,total");
  CHECK(static_cast<bool>(std::getline(csv, row)));
  CHECK(!std::getline(csv, extra));
  fs::remove_all(dir);
}

TEST_CASE("dataset validation") {
  DomainDataset empty{"empty", {}};
  CHECK_THROWS(empty.validate());
  auto dir = scratch_dir("dataset");
  auto corpus = distortion::synthetic_corpus(2, 24, 20, 1);
  distortion::write_ppm(dir / "b.ppm", corpus[1]);
  distortion::write_ppm(dir / "a.ppm", corpus[0]);
  std::ofstream(dir / "notes.txt") << "ignored";
  auto d = DomainDataset::load_directory(dir);
  REQUIRE(d.images.size() == 2);
  CHECK(d.images[0] == corpus[0]);
  CHECK(d.min_side() == 20);

  Trainer t(tiny_config(1));
  TrainConfig big_crop = tiny_config(1);
  big_crop.crop = 32;
  Trainer t2(big_crop);
  CHECK_THROWS(t2.train(d, d));
  fs::remove_all(dir);
}

TEST_CASE("checkpoint round trip") {
  auto dir = scratch_dir("ckpt");
  Trainer t(tiny_config(21));
  auto b = random_batch(3);
  t.train_step(b.x, b.y, 1e-3);  // moves running statistics as well
  t.save(dir / "ck");
  CHECK(!fs::exists(dir / "ck.tmp"));
  auto g = load_network(dir / "ck", "G");
  auto dx = load_network(dir / "ck", "D_X");
  CHECK(snapshot(g) == snapshot(t.G()));
  CHECK(snapshot(dx) == snapshot(t.D_X()));
  CHECK(g.spec() == t.G().spec());
  CHECK(emulate(g, distortion::synthetic_corpus(1, 24, 24, 0)[0]) ==
        emulate(t.G(), distortion::synthetic_corpus(1, 24, 24, 0)[0]));
  CHECK(checkpoint_metadata(dir / "ck").at("seed") == "21");

  CHECK_THROWS_AS(load_network(dir / "ck", "H"), CheckpointError);
  CHECK_THROWS_AS(load_network(dir / "missing", "G"), CheckpointError);
  fs::resize_file(dir / "ck" / "params.bin", 16);
  CHECK_THROWS_AS(load_network(dir / "ck", "G"), CheckpointError);
  fs::remove_all(dir);
}

TEST_CASE("emulate preserves dimensions") {
  Trainer t(tiny_config(4));
  for (int side : {70, 128}) {
    auto img = distortion::synthetic_corpus(1, side, side, 2)[0];
    auto out = emulate(t.G(), img);
    CHECK(out.width == side);
    CHECK(out.height == side);
    CHECK(emulate(t.G(), img) == out);
  }
  auto odd = distortion::synthetic_corpus(1, 37, 19, 2)[0];
  auto out = emulate(t.G(), odd);
  CHECK((out.width == 37 && out.height == 19));
  CHECK_THROWS_AS(emulate(t.G(), distortion::synthetic_corpus(1, 15, 40, 2)[0]), std::invalid_argument);
}
