#include "camda/cyclegan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "camda/cyclegan/checkpoint.hpp"
#include "camda/cyclegan/convert.hpp"
#include "camda/distortion/jpeg.hpp"

namespace camda::cyclegan {

namespace fs = std::filesystem;
using Tensor = ad::Tensor<float>;
using Net = netzoo::Network<float>;

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

netzoo::ArchitectureSpec generator_spec(const TrainConfig& c) {
  if (c.generator_width == 64 && c.generator_blocks == 9) return netzoo::builtin_spec(netzoo::Builtin::ResNet9Generator);
  return netzoo::resnet_generator_spec(c.generator_width, c.generator_blocks);
}

std::vector<Tensor> concat(std::vector<Tensor> a, const std::vector<Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Batch-norm buffers of a network, for restoring after a side-effect-free evaluation.
std::vector<std::vector<float>> buffers(Net& net) {
  std::vector<std::vector<float>> out;
  for (const auto& e : net.state())
    if (!e.is_parameter) out.emplace_back(e.data.begin(), e.data.end());
  return out;
}

void restore(Net& net, const std::vector<std::vector<float>>& saved) {
  std::size_t i = 0;
  for (auto& e : net.state())
    if (!e.is_parameter) std::copy(saved[i].begin(), saved[i].end(), e.data.begin()), ++i;
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("invalid training configuration: " + what);
  };
  require(discriminator != netzoo::Builtin::ResNet9Generator, "discriminator must be bd, sd or esd");
  require(lambda_c >= 0 && lambda_i >= 0, "loss weights must be >= 0");
  require(base_lr > 0, "base_lr must be > 0");
  require(epochs_const >= 0 && epochs_decay >= 0 && total_epochs() >= 1, "need at least one epoch");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(crop >= 16 && crop % 4 == 0, "crop must be a multiple of 4 and >= 16");
  require(pool_size >= 0, "pool_size must be >= 0");
  require(generator_width >= 1 && generator_blocks >= 0, "generator width >= 1 and blocks >= 0");
  require(checkpoint_every >= 1, "checkpoint_every must be >= 1");
}

double lr_schedule(int epoch, const TrainConfig& c) {
  if (epoch < 0 || epoch >= c.total_epochs()) {
    throw std::out_of_range("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(c.total_epochs()) + ")");
  }
  if (epoch < c.epochs_const) return c.base_lr;
  return c.base_lr * (1.0 - static_cast<double>(epoch - c.epochs_const + 1) / (c.epochs_decay + 1));
}

DomainDataset DomainDataset::load_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
  DomainDataset d{dir.filename().string(), {}};
  for (const auto& f : distortion::list_images(dir)) d.images.push_back(distortion::read_image(f));
  d.validate();
  return d;
}

int DomainDataset::min_side() const {
  int m = std::numeric_limits<int>::max();
  for (const auto& img : images) m = std::min({m, img.width, img.height});
  return m;
}

void DomainDataset::validate() const {
  if (images.empty()) throw std::invalid_argument("dataset '" + name + "' is empty");
}

Trainer::Trainer(TrainConfig config)
    : config_((config.validate(), config)),
      g_(Net::build(generator_spec(config_), derive_seed(config_.seed, 1))),
      f_(Net::build(generator_spec(config_), derive_seed(config_.seed, 2))),
      dx_(Net::build(netzoo::builtin_spec(config_.discriminator), derive_seed(config_.seed, 3))),
      dy_(Net::build(netzoo::builtin_spec(config_.discriminator), derive_seed(config_.seed, 4))),
      opt_g_(concat(g_.parameters(), f_.parameters()), {config_.base_lr, 0.5, 0.999, 1e-8}),
      opt_d_(concat(dx_.parameters(), dy_.parameters()), {config_.base_lr, 0.5, 0.999, 1e-8}),
      pool_x_(static_cast<std::size_t>(config_.pool_size), derive_seed(config_.seed, 5)),
      pool_y_(static_cast<std::size_t>(config_.pool_size), derive_seed(config_.seed, 6)),
      rng_(derive_seed(config_.seed, 7)) {}

namespace {

struct GeneratorPass {
  Tensor fake_y, fake_x, gan_g, gan_f, cycle, identity, total;
};

GeneratorPass generator_pass(Net& g, Net& f, Net& dx, Net& dy, const Tensor& x, const Tensor& y,
                             const TrainConfig& c) {
  GeneratorPass p;
  p.fake_y = g.forward(x);
  const Tensor rec_x = f.forward(p.fake_y);
  p.fake_x = f.forward(y);
  const Tensor rec_y = g.forward(p.fake_x);
  p.gan_g = lsgan_g_loss(dy.forward(p.fake_y));
  p.gan_f = lsgan_g_loss(dx.forward(p.fake_x));
  p.cycle = cycle_loss(x, rec_x, y, rec_y);
  if (c.lambda_i > 0) {
    p.identity = identity_loss(g.forward(y), y, f.forward(x), x);
  } else {
    ad::NoGradGuard guard;  // reported only
    p.identity = identity_loss(g.forward(y), y, f.forward(x), x);
  }
  p.total = full_objective(p.gan_g, p.gan_f, p.cycle, p.identity, c.lambda_c, c.lambda_i);
  return p;
}

}  // namespace

StepLosses Trainer::generator_step(const Tensor& x, const Tensor& y, double lr) {
  dx_.set_requires_grad(false);
  dy_.set_requires_grad(false);
  opt_g_.zero_grad();
  StepLosses out;
  try {
    GeneratorPass p = generator_pass(g_, f_, dx_, dy_, x, y, config_);
    out.g = {p.gan_g.item(), p.gan_f.item(), p.cycle.item(), p.identity.item()};
    out.total = p.total.item();
    if (!std::isfinite(out.total)) throw ad::NumericError("non-finite generator objective");
    ad::backward(p.total);
    opt_g_.set_lr(lr);
    opt_g_.step();
    fake_x_ = p.fake_x.detach();
    fake_y_ = p.fake_y.detach();
  } catch (const ad::NumericError& e) {
    dx_.set_requires_grad(true);
    dy_.set_requires_grad(true);
    ad::Tape<float>::active().clear();
    std::ostringstream msg;
    msg << "generator step failed at epoch " << epoch_ << ", step " << history_.size() << " (lr " << lr
        << "): " << e.what() << "; last components L_GAN_G=" << out.g.gan_g << " L_GAN_F=" << out.g.gan_f
        << " L_c=" << out.g.cycle << " L_i=" << out.g.identity;
    throw TrainingError(msg.str());
  }
  dx_.set_requires_grad(true);
  dy_.set_requires_grad(true);
  return out;
}

void Trainer::discriminator_step(const Tensor& x, const Tensor& y, double lr, StepLosses& losses) {
  if (!fake_x_.defined()) throw std::logic_error("discriminator_step requires a preceding generator_step");
  opt_d_.zero_grad();
  try {
    const Tensor pooled_y = pool_y_.query(fake_y_);
    const Tensor pooled_x = pool_x_.query(fake_x_);
    const Tensor d_y = lsgan_d_loss(dy_.forward(y), dy_.forward(pooled_y));
    const Tensor d_x = lsgan_d_loss(dx_.forward(x), dx_.forward(pooled_x));
    losses.d_x = d_x.item();
    losses.d_y = d_y.item();
    if (!std::isfinite(losses.d_x) || !std::isfinite(losses.d_y)) {
      throw ad::NumericError("non-finite discriminator loss");
    }
    ad::backward(ad::add(d_x, d_y));
    opt_d_.set_lr(lr);
    opt_d_.step();
  } catch (const ad::NumericError& e) {
    ad::Tape<float>::active().clear();
    std::ostringstream msg;
    msg << "discriminator step failed at epoch " << epoch_ << ", step " << history_.size() << ": " << e.what()
        << "; D_X=" << losses.d_x << " D_Y=" << losses.d_y;
    throw TrainingError(msg.str());
  }
}

StepLosses Trainer::train_step(const Tensor& x, const Tensor& y, double lr) {
  StepLosses s = generator_step(x, y, lr);
  discriminator_step(x, y, lr, s);
  history_.push_back(s);
  return s;
}

double Trainer::generator_objective(const Tensor& x, const Tensor& y) {
  const auto bx = buffers(dx_), by = buffers(dy_);
  double total;
  {
    ad::NoGradGuard guard;
    total = generator_pass(g_, f_, dx_, dy_, x, y, config_).total.item();
  }
  restore(dx_, bx);
  restore(dy_, by);
  return total;
}

Tensor Trainer::random_crops(const DomainDataset& d, const std::vector<std::size_t>& order, std::size_t first) {
  std::vector<Image> batch;
  const int c = config_.crop;
  for (int b = 0; b < config_.batch_size; ++b) {
    const Image& img = d.images[order[(first + static_cast<std::size_t>(b)) % order.size()]];
    std::uniform_int_distribution<int> top(0, img.height - c), left(0, img.width - c);
    const int t = top(rng_), l = left(rng_);
    batch.push_back(img.crop(l, t, c, c));
  }
  return normalize_batch<float>(batch);
}

void Trainer::save(const fs::path& dir) {
  save_checkpoint(dir, {{"G", &g_}, {"F", &f_}, {"D_X", &dx_}, {"D_Y", &dy_}},
                  {{"epoch", std::to_string(epoch_)},
                   {"seed", std::to_string(config_.seed)},
                   {"discriminator", netzoo::builtin_name(config_.discriminator)}});
}

void Trainer::train(const DomainDataset& x, const DomainDataset& y, const Hooks& hooks) {
  x.validate();
  y.validate();
  const int min_side = std::min(x.min_side(), y.min_side());
  if (config_.crop > min_side) {
    throw std::invalid_argument("crop " + std::to_string(config_.crop) + " exceeds the smallest image side " +
                                std::to_string(min_side));
  }
  std::ofstream csv, dcsv;
  if (hooks.out_dir) {
    fs::create_directories(*hooks.out_dir / "checkpoints");
    csv.open(*hooks.out_dir / "loss.csv", epoch_ == 0 ? std::ios::trunc : std::ios::app);
    dcsv.open(*hooks.out_dir / "discriminator_loss.csv", epoch_ == 0 ? std::ios::trunc : std::ios::app);
    if (!csv || !dcsv) throw std::runtime_error("cannot write loss CSV under " + hooks.out_dir->string());
    if (epoch_ == 0) {
      csv << "epoch,L_GAN_G,L_GAN_F,L_c,L_i,total\n";
      dcsv << "epoch,lr,L_D_X,L_D_Y\n";
    }
    csv << std::setprecision(8);
    dcsv << std::setprecision(8);
  }
  const std::size_t per_epoch = std::max<std::size_t>(
      1, std::min(x.images.size(), y.images.size()) / static_cast<std::size_t>(config_.batch_size));
  while (epoch_ < config_.total_epochs()) {
    const double lr = lr_schedule(epoch_, config_);
    std::vector<std::size_t> ox(x.images.size()), oy(y.images.size());
    std::iota(ox.begin(), ox.end(), std::size_t{0});
    std::iota(oy.begin(), oy.end(), std::size_t{0});
    std::shuffle(ox.begin(), ox.end(), rng_);
    std::shuffle(oy.begin(), oy.end(), rng_);
    EpochLosses e{epoch_, lr, {}, 0, 0, 0};
    for (std::size_t s = 0; s < per_epoch; ++s) {
      const std::size_t first = s * static_cast<std::size_t>(config_.batch_size);
      const Tensor bx = random_crops(x, ox, first);
      const Tensor by = random_crops(y, oy, first);
      const StepLosses l = train_step(bx, by, lr);
      e.g.gan_g += l.g.gan_g;
      e.g.gan_f += l.g.gan_f;
      e.g.cycle += l.g.cycle;
      e.g.identity += l.g.identity;
      e.total += l.total;
      e.d_x += l.d_x;
      e.d_y += l.d_y;
    }
    const double n = static_cast<double>(per_epoch);
    e.g = {e.g.gan_g / n, e.g.gan_f / n, e.g.cycle / n, e.g.identity / n};
    e.total /= n;
    e.d_x /= n;
    e.d_y /= n;
    epochs_.push_back(e);
    ++epoch_;
    if (hooks.out_dir) {
      csv << e.epoch << ',' << e.g.gan_g << ',' << e.g.gan_f << ',' << e.g.cycle << ',' << e.g.identity << ','
          << e.total << '\n'
          << std::flush;
      dcsv << e.epoch << ',' << e.lr << ',' << e.d_x << ',' << e.d_y << '\n' << std::flush;
      if (epoch_ % config_.checkpoint_every == 0 || epoch_ == config_.total_epochs()) {
        std::ostringstream name;
        name << "epoch_" << std::setw(4) << std::setfill('0') << epoch_;
        save(*hooks.out_dir / "checkpoints" / name.str());
        std::ofstream(*hooks.out_dir / "checkpoints" / "latest") << name.str() << '\n';
      }
    }
    if (hooks.on_epoch) hooks.on_epoch(e);
  }
}

Image emulate(Net& generator, const Image& image) {
  if (image.width < 16 || image.height < 16) {
    throw std::invalid_argument("emulate: image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                                " is smaller than the 16x16 generator minimum");
  }
  const int pw = (image.width + 3) / 4 * 4, ph = (image.height + 3) / 4 * 4;
  Image padded(pw, ph);
  for (int yy = 0; yy < ph; ++yy)
    for (int xx = 0; xx < pw; ++xx)
      for (int c = 0; c < 3; ++c) padded.at(xx, yy, c) = image.at(reflect(xx, image.width), reflect(yy, image.height), c);
  ad::NoGradGuard guard;
  const Tensor out = generator.forward(normalize_image<float>(padded), ad::NormMode::Eval);
  const Image full = denormalize(out);
  return full.crop(0, 0, image.width, image.height);
}

std::vector<Image> emulate(Net& generator, const std::vector<Image>& images) {
  std::vector<Image> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(emulate(generator, img));
  return out;
}

}  // namespace camda::cyclegan
