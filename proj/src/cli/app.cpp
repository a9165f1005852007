#include "camda/cli/app.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "camda/cli/config.hpp"
#include "camda/cli/manifest.hpp"
#include "camda/cyclegan/checkpoint.hpp"
#include "camda/cyclegan/trainer.hpp"
#include "camda/distortion/camera.hpp"
#include "camda/distortion/jpeg.hpp"
#include "camda/harness/scenarios.hpp"
#include "camda/netzoo/arch_io.hpp"
#include "camda/netzoo/gradcheck.hpp"

namespace camda::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
  std::vector<std::string> argv;
  std::ostream& out;
  std::ostream& err;
};

struct CommandDef {
  std::string name;
  std::string description;
  std::vector<KeySpec> keys;
  std::vector<std::string> positionals;
  std::function<int(const RunConfig&, Context&)> run;
};

std::string num(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

fs::path out_dir(const RunConfig& c) { return fs::path(c.require("out")); }

// --- distortion selection -------------------------------------------------

const std::vector<KeySpec> kDistortionKeys = {
    {"model", "", "camera model A-F (blur, noise, quality preset)"},
    {"blur", "", "Gaussian blur sigma"},
    {"noise", "", "AWGN sigma"},
    {"jpeg", "", "JPEG compression level 1-100"},
};

struct Selected {
  distortion::Distortion f;
  std::string model;
};

Selected select_distortion(const RunConfig& c) {
  Selected s;
  if (c.has("model")) {
    if (c.has("blur") || c.has("noise") || c.has("jpeg")) {
      throw ConfigError("--model cannot be combined with --blur, --noise or --jpeg");
    }
    const std::string& m = c.get("model");
    if (m.size() != 1) throw ConfigError("model must be one letter A-F, got '" + m + "'");
    s.model = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(m[0]))));
    s.f = distortion::Distortion::from_model(distortion::camera_model(m[0]));
    return s;
  }
  if (c.has("blur")) s.f.blur_sigma = c.get_double("blur");
  if (c.has("noise")) s.f.noise_sigma = c.get_double("noise");
  if (c.has("jpeg")) s.f.quality = c.get_int("jpeg");
  distortion::CameraModelParams{s.f.blur_sigma.value_or(0), s.f.noise_sigma.value_or(0), s.f.quality.value_or(100)}
      .validate();
  return s;
}

void describe_distortion(const Selected& s, Manifest& m) {
  if (!s.model.empty()) m.add("model", s.model);
  if (s.f.blur_sigma) m.add("blur-sigma", num(*s.f.blur_sigma));
  if (s.f.noise_sigma) m.add("noise-sigma", num(*s.f.noise_sigma));
  if (s.f.quality) m.add("quality", std::to_string(*s.f.quality));
  m.add("distortion", s.f.describe());
}

// --- analyze --------------------------------------------------------------

struct TableRow {
  std::string name;
  int receptive_field;
  std::int64_t params;
};

int cmd_analyze(const RunConfig& c, Context& ctx) {
  std::vector<std::pair<std::string, netzoo::ArchitectureSpec>> specs;
  for (const auto& b : c.get_list("builtin")) {
    const auto v = netzoo::parse_builtin(b);
    specs.emplace_back(netzoo::builtin_name(v), netzoo::builtin_spec(v));
  }
  for (const auto& f : c.get_list("spec")) {
    try {
      auto spec = netzoo::load_architecture(f);
      specs.emplace_back(spec.name, std::move(spec));
    } catch (const netzoo::ArchitectureError& e) {
      throw netzoo::ArchitectureError(f + ": " + e.what());
    }
  }
  const bool check = c.get_bool("check-table1");
  if (specs.empty() && !check) {
    for (auto b : {netzoo::Builtin::BD, netzoo::Builtin::SD, netzoo::Builtin::ESD}) {
      specs.emplace_back(netzoo::builtin_name(b), netzoo::builtin_spec(b));
    }
  }

  std::vector<TableRow> rows;
  for (const auto& [name, spec] : specs) {
    netzoo::validate(spec);
    rows.push_back({name, netzoo::receptive_field(spec), netzoo::count_params(spec)});
  }
  if (!rows.empty()) {
    ctx.out << "name, receptive field, parameters, parameters (1e6)\n";
    for (const auto& r : rows) {
      char m[32];
      std::snprintf(m, sizeof m, "%.3f", static_cast<double>(r.params) / 1e6);
      ctx.out << r.name << ", " << r.receptive_field << ", " << r.params << ", " << m << '\n';
    }
  }

  int status = 0;
  if (check) {
    const std::vector<TableRow> expected = {{"bd", 70, 2764737}, {"sd", 34, 663361}, {"esd", 16, 136513}};
    for (const auto& e : expected) {
      const auto spec = netzoo::builtin_spec(netzoo::parse_builtin(e.name));
      const int rf = netzoo::receptive_field(spec);
      const auto n = netzoo::count_params(spec);
      if (rf != e.receptive_field || n != e.params) {
        ctx.err << "table1 mismatch for " << e.name << ": got (" << rf << ", " << n << "), expected ("
                << e.receptive_field << ", " << e.params << ")\n";
        status = 3;
      }
    }
    ctx.err << (status == 0 ? "table1 check passed\n" : "table1 check failed\n");
  }

  if (c.has("out")) {
    const fs::path dir = out_dir(c);
    std::ostringstream csv;
    csv << "name,receptive_field,parameters\n";
    for (const auto& r : rows) csv << r.name << ',' << r.receptive_field << ',' << r.params << '\n';
    write_text_file(dir / "analyze.csv", csv.str());
    Manifest m;
    m.argv = ctx.argv;
    m.add("table1-check", check ? (status == 0 ? "passed" : "failed") : "not requested");
    m.outputs.push_back(dir / "analyze.csv");
    write_run_record(dir, "", c, m);
  }
  return status;
}

// --- distort --------------------------------------------------------------

int cmd_distort(const RunConfig& c, Context& ctx) {
  const Selected s = select_distortion(c);
  const fs::path input = c.require("input");
  const fs::path output = c.require("output");
  const auto seed = c.get_u64("seed");
  const distortion::Image img = distortion::read_image(input);

  std::string ext = output.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  if (ext == ".jpg" || ext == ".jpeg") {
    if (!s.f.quality) throw ConfigError("writing a JPEG needs a compression level (--jpeg or --model)");
    distortion::Distortion pre = s.f;
    pre.quality.reset();
    distortion::write_bytes(output, distortion::jpeg_encode(pre.apply(img, seed), *s.f.quality));
  } else if (ext == ".ppm") {
    distortion::write_ppm(output, s.f.apply(img, seed));
  } else {
    throw ConfigError("output must end in .ppm, .jpg or .jpeg: " + output.string());
  }

  Manifest m;
  m.argv = ctx.argv;
  describe_distortion(s, m);
  m.add("input", input.string() + " fnv1a:" + file_digest(input));
  m.outputs.push_back(output);
  if (c.has("out")) {
    write_run_record(out_dir(c), "", c, m);
  } else {
    write_run_record(output.has_parent_path() ? output.parent_path() : fs::path("."),
                     output.filename().string() + ".", c, m);
  }
  return 0;
}

// --- harness settings shared by domains and evaluate ----------------------

const std::vector<KeySpec> kHarnessKeys = {
    {"classes", "4", "number of shape classes"},
    {"train-per-class", "200", "training images per class"},
    {"test-per-class", "50", "test images per class"},
    {"width", "16", "classifier base width"},
    {"pretrain-steps", "3000", "pretraining steps"},
    {"pretrain-lr", "0.001", "pretraining learning rate"},
    {"finetune-steps", "500", "fine-tuning steps"},
    {"finetune-lr", "0.001", "fine-tuning learning rate"},
    {"batch", "16", "classifier batch size"},
};

harness::HarnessConfig harness_config(const RunConfig& c) {
  harness::HarnessConfig h;
  h.seed = c.get_u64("seed");
  h.classes = c.get_int("classes");
  h.train_per_class = c.get_int("train-per-class");
  h.test_per_class = c.get_int("test-per-class");
  h.width = c.get_int("width");
  h.pretrain.steps = c.get_int("pretrain-steps");
  h.pretrain.lr = c.get_double("pretrain-lr");
  h.pretrain.batch_size = c.get_int("batch");
  h.finetune.steps = c.get_int("finetune-steps");
  h.finetune.lr = c.get_double("finetune-lr");
  h.finetune.batch_size = c.get_int("batch");
  return h;
}

std::vector<KeySpec> concat(std::vector<KeySpec> a, const std::vector<KeySpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void write_images(const fs::path& dir, const std::vector<distortion::Image>& images) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.ppm", i);
    distortion::write_ppm(dir / name, images[i]);
  }
}

int cmd_domains(const RunConfig& c, Context& ctx) {
  const Selected s = select_distortion(c);
  const auto h = harness_config(c);
  const fs::path dir = out_dir(c);
  const int target = c.has("target-per-class") ? c.get_int("target-per-class") : h.train_per_class;
  const auto x = harness::source_domain(h);
  const auto y = harness::target_domain(h, s.f, target);
  write_images(dir / "x", x.images);
  write_images(dir / "y", y.images);
  Manifest m;
  m.argv = ctx.argv;
  describe_distortion(s, m);
  m.add("x-images", std::to_string(x.images.size()));
  m.add("y-images", std::to_string(y.images.size()));
  write_run_record(dir, "", c, m);
  ctx.err << "wrote " << x.images.size() << " pristine and " << y.images.size() << " distorted images to " << dir.string()
          << '\n';
  return 0;
}

// --- train-i2i ------------------------------------------------------------

int cmd_train(const RunConfig& c, Context& ctx) {
  cyclegan::TrainConfig t;
  t.discriminator = netzoo::parse_builtin(c.get("variant"));
  if (t.discriminator == netzoo::Builtin::ResNet9Generator) throw ConfigError("variant must be bd, sd or esd");
  t.crop = c.get_int("crop");
  t.epochs_const = c.get_int("epochs-const");
  t.epochs_decay = c.get_int("epochs-decay");
  t.lambda_c = c.get_double("lambda-c");
  t.lambda_i = c.get_double("lambda-i");
  t.base_lr = c.get_double("lr");
  t.batch_size = c.get_int("batch");
  t.pool_size = c.get_int("pool");
  t.generator_width = c.get_int("width");
  t.generator_blocks = c.get_int("blocks");
  t.checkpoint_every = c.get_int("checkpoint-every");
  t.seed = c.get_u64("seed");
  t.validate();

  const auto x = cyclegan::DomainDataset::load_directory(c.require("domain-x"));
  const auto y = cyclegan::DomainDataset::load_directory(c.require("domain-y"));
  const fs::path dir = out_dir(c);
  fs::create_directories(dir);
  // Written first so an interrupted run still records its settings.
  write_text_file(dir / "config.txt", c.snapshot());

  cyclegan::Trainer trainer(t);
  cyclegan::Trainer::Hooks hooks;
  hooks.out_dir = dir;
  hooks.on_epoch = [&](const cyclegan::EpochLosses& e) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %d/%d lr %.3g total %.4f cyc %.4f id %.4f D_X %.4f D_Y %.4f\n",
                  e.epoch + 1, t.total_epochs(), e.lr, e.total, e.g.cycle, e.g.identity, e.d_x, e.d_y);
    ctx.err << line << std::flush;
  };
  trainer.train(x, y, hooks);

  Manifest m;
  m.argv = ctx.argv;
  m.add("domain-x-images", std::to_string(x.images.size()));
  m.add("domain-y-images", std::to_string(y.images.size()));
  std::string latest;
  std::ifstream(dir / "checkpoints" / "latest") >> latest;
  m.add("final-checkpoint", (dir / "checkpoints" / latest).string());
  m.outputs.push_back(dir / "loss.csv");
  m.outputs.push_back(dir / "checkpoints" / latest / "params.bin");
  write_run_record(dir, "", c, m);
  return 0;
}

// --- adapt ----------------------------------------------------------------

fs::path resolve_checkpoint(const fs::path& p) {
  // Accept a training output directory and follow checkpoints/latest.
  if (fs::exists(p / "manifest.txt") && fs::exists(p / "params.bin")) return p;
  std::string latest;
  if (std::ifstream(p / "checkpoints" / "latest") >> latest) return p / "checkpoints" / latest;
  throw harness::MissingCheckpoint("no checkpoint at " + p.string());
}

int cmd_adapt(const RunConfig& c, Context& ctx) {
  const fs::path ckpt = resolve_checkpoint(c.require("checkpoint"));
  const fs::path input = c.require("input");
  const fs::path dir = out_dir(c);
  auto g = cyclegan::load_network(ckpt, "G");
  const auto files = distortion::list_images(input);
  if (files.empty()) throw ConfigError("no images in " + input.string());
  fs::create_directories(dir);
  Manifest m;
  m.argv = ctx.argv;
  m.add("checkpoint", ckpt.string());
  for (const auto& f : files) {
    const fs::path target = dir / f.filename().replace_extension(".ppm");
    distortion::write_ppm(target, cyclegan::emulate(g, distortion::read_image(f)));
  }
  // Annotations travel unchanged.
  if (fs::exists(input / "labels.csv")) {
    fs::copy_file(input / "labels.csv", dir / "labels.csv", fs::copy_options::overwrite_existing);
    m.outputs.push_back(dir / "labels.csv");
  }
  m.add("images", std::to_string(files.size()));
  write_run_record(dir, "", c, m);
  ctx.err << "adapted " << files.size() << " images\n";
  return 0;
}

// --- evaluate -------------------------------------------------------------

int cmd_evaluate(const RunConfig& c, Context& ctx) {
  const Selected s = select_distortion(c);
  const auto h = harness_config(c);
  std::vector<harness::Scenario> scenarios;
  for (const auto& name : c.get_list("scenarios")) {
    harness::Scenario sc{harness::parse_scenario(name), s.f, std::nullopt};
    if (sc.kind == harness::ScenarioKind::Adapted) sc.checkpoint = resolve_checkpoint(c.require("checkpoint"));
    scenarios.push_back(sc);
  }
  if (scenarios.empty()) throw ConfigError("no scenarios selected");
  const fs::path dir = out_dir(c);
  fs::create_directories(dir);

  const auto results = harness::run_scenarios(h, scenarios);
  harness::write_results_csv(dir / "results.csv", results);
  for (const auto& r : results) {
    char line[96];
    std::snprintf(line, sizeof line, "%-8s %-22s seed %llu accuracy %.4f\n",
                  harness::scenario_name(r.scenario.kind).c_str(), r.scenario.distortion.describe().c_str(),
                  static_cast<unsigned long long>(r.seed), r.accuracy);
    ctx.out << line;
  }
  Manifest m;
  m.argv = ctx.argv;
  describe_distortion(s, m);
  m.add("harness-hash", h.hash());
  m.outputs.push_back(dir / "results.csv");
  write_run_record(dir, "", c, m);
  return 0;
}

// --- grad-check -----------------------------------------------------------

int cmd_gradcheck(const RunConfig& c, Context& ctx) {
  const auto seed = c.get_u64("seed");
  auto results = netzoo::op_gradient_suite(seed);
  if (c.get_bool("networks")) {
    auto n = netzoo::network_gradient_suite(seed, static_cast<std::size_t>(c.get_int("samples")));
    results.insert(results.end(), n.begin(), n.end());
  }
  bool ok = true;
  std::ostringstream csv;
  csv << "name,max_relative_error,elements,passed\n";
  for (const auto& r : results) {
    ok = ok && r.passed;
    char line[160];
    std::snprintf(line, sizeof line, "%-32s %.3e  %6zu  %s\n", r.name.c_str(), r.max_relative_error,
                  r.elements_checked, r.passed ? "ok" : "FAIL");
    ctx.out << line;
    csv << r.name << ',' << r.max_relative_error << ',' << r.elements_checked << ',' << (r.passed ? 1 : 0) << '\n';
  }
  ctx.err << (ok ? "all gradient checks passed\n" : "gradient checks failed\n");
  if (c.has("out")) {
    const fs::path dir = out_dir(c);
    write_text_file(dir / "gradcheck.csv", csv.str());
    Manifest m;
    m.argv = ctx.argv;
    m.add("checks", std::to_string(results.size()));
    m.add("passed", ok ? "true" : "false");
    m.outputs.push_back(dir / "gradcheck.csv");
    write_run_record(dir, "", c, m);
  }
  return ok ? 0 : 1;
}

// --- registry -------------------------------------------------------------

std::vector<CommandDef> commands() {
  return {
      {"analyze",
       "Receptive field and parameter count of discriminator architectures",
       {{"builtin", "", "builtin architectures (bd, sd, esd)", KeyKind::List},
        {"spec", "", "architecture text files", KeyKind::List},
        {"check-table1", "false", "fail unless bd/sd/esd match the reference table", KeyKind::Flag}},
       {},
       cmd_analyze},
      {"distort",
       "Apply a camera model or single distortions to an image",
       concat(kDistortionKeys, {{"input", "", "input image (.ppm or .jpg)"},
                                {"output", "", "output image (.ppm or .jpg)"}}),
       {"input", "output"},
       cmd_distort},
      {"domains",
       "Write the pristine and distorted image domains of the classification task",
       concat(concat(kHarnessKeys, kDistortionKeys),
              {{"target-per-class", "", "distorted images per class (default: train-per-class)"}}),
       {},
       cmd_domains},
      {"train-i2i",
       "Train a CycleGAN between two image directories",
       {{"variant", "bd", "discriminator: bd, sd or esd"},
        {"domain-x", "", "pristine image directory"},
        {"domain-y", "", "distorted image directory"},
        {"crop", "256", "random crop side"},
        {"epochs-const", "100", "epochs at the base learning rate"},
        {"epochs-decay", "100", "epochs of linear decay"},
        {"lambda-c", "10", "cycle-consistency weight"},
        {"lambda-i", "0.5", "identity weight"},
        {"lr", "0.0002", "base learning rate"},
        {"batch", "1", "batch size"},
        {"pool", "50", "image pool capacity"},
        {"width", "64", "generator base width"},
        {"blocks", "9", "generator residual blocks"},
        {"checkpoint-every", "10", "checkpoint interval in epochs"}},
       {},
       cmd_train},
      {"adapt",
       "Apply a trained generator to every image of a directory",
       {{"checkpoint", "", "checkpoint directory or train-i2i output directory"},
        {"input", "", "input image directory"}},
       {},
       cmd_adapt},
      {"evaluate",
       "Run baseline / oracle / adapted scenarios of the classification task",
       concat(concat(kHarnessKeys, kDistortionKeys),
              {{"scenarios", "baseline,oracle", "comma-separated scenario list"},
               {"checkpoint", "", "generator checkpoint for the adapted scenario"}}),
       {},
       cmd_evaluate},
      {"grad-check",
       "Finite-difference check of every op and network",
       {{"networks", "true", "include whole-network checks"},
        {"samples", "3", "sampled entries per parameter tensor in network checks"}},
       {},
       cmd_gradcheck},
  };
}

const std::vector<KeySpec> kCommonKeys = {
    {"seed", "0", "random seed"},
    {"out", "", "output directory"},
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Camera-specific distortion emulation toolkit", "camda"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  auto defs = commands();
  struct Bound {
    CLI::App* sub;
    std::vector<KeySpec> keys;
    std::map<std::string, std::string> values;
    std::map<std::string, bool> flags;
    std::map<std::string, std::vector<std::string>> lists;
    std::map<std::string, CLI::Option*> options;
    std::string config_file;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (auto& d : defs) {
    auto b = std::make_unique<Bound>();
    b->sub = app.add_subcommand(d.name, d.description);
    b->keys = concat(d.keys, kCommonKeys);
    b->sub->add_option("--config", b->config_file, "key = value settings file; flags override it");
    for (const auto& k : b->keys) {
      const bool positional = std::find(d.positionals.begin(), d.positionals.end(), k.name) != d.positionals.end();
      const std::string flag = positional ? k.name : "--" + k.name;
      CLI::Option* o = nullptr;
      switch (k.kind) {
        case KeyKind::Value: o = b->sub->add_option(flag, b->values[k.name], k.help); break;
        case KeyKind::Flag: o = b->sub->add_flag(flag, b->flags[k.name], k.help); break;
        case KeyKind::List: o = b->sub->add_option(flag, b->lists[k.name], k.help)->expected(1, -1); break;
      }
      if (!k.default_value.empty()) o->description(k.help + " [" + k.default_value + "]");
      b->options[k.name] = o;
    }
    bound.push_back(std::move(b));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  for (std::size_t i = 0; i < defs.size(); ++i) {
    Bound& b = *bound[i];
    if (!b.sub->parsed()) continue;
    Context ctx{{"camda"}, out, err};
    ctx.argv.insert(ctx.argv.end(), args.begin(), args.end());
    try {
      RunConfig config(defs[i].name, b.keys);
      if (!b.config_file.empty()) config.merge(load_config_file(b.config_file));
      for (const auto& k : b.keys) {
        if (b.options[k.name]->count() == 0) continue;
        switch (k.kind) {
          case KeyKind::Value: config.set(k.name, b.values[k.name]); break;
          case KeyKind::Flag: config.set(k.name, b.flags[k.name] ? "true" : "false"); break;
          case KeyKind::List: {
            std::string joined;
            for (const auto& v : b.lists[k.name]) joined += (joined.empty() ? "" : ",") + v;
            config.set(k.name, joined);
            break;
          }
        }
      }
      return defs[i].run(config, ctx);
    } catch (const std::exception& e) {
      err << "camda " << defs[i].name << ": error: " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}

}  // namespace camda::cli
