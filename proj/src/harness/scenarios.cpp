#include "camda/harness/scenarios.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "camda/cyclegan/checkpoint.hpp"

namespace camda::harness {

namespace fs = std::filesystem;

std::string scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Baseline: return "baseline";
    case ScenarioKind::Oracle: return "oracle";
    case ScenarioKind::Adapted: return "adapted";
  }
  return "?";
}

ScenarioKind parse_scenario(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto k : {ScenarioKind::Baseline, ScenarioKind::Oracle, ScenarioKind::Adapted}) {
    if (scenario_name(k) == n) return k;
  }
  throw std::invalid_argument("unknown scenario '" + name + "' (expected baseline, oracle or adapted)");
}

void Scenario::validate() const {
  if (kind == ScenarioKind::Adapted && !checkpoint) {
    throw std::invalid_argument("adapted scenario requires a checkpoint");
  }
  if (kind != ScenarioKind::Adapted && checkpoint) {
    throw std::invalid_argument(scenario_name(kind) + " scenario takes no checkpoint");
  }
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void describe_options(std::ostringstream& s, const char* prefix, const TrainOptions& o) {
  s << prefix << ".steps = " << o.steps << '\n'
    << prefix << ".batch_size = " << o.batch_size << '\n'
    << prefix << ".lr = " << o.lr << '\n'
    << prefix << ".drop_at = " << o.drop_at << '\n'
    << prefix << ".drop_factor = " << o.drop_factor << '\n';
}

std::uint64_t stream(std::uint64_t seed, std::uint64_t id) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + id * 0xD1B54A32D192ED03ull + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

enum Stream : std::uint64_t { kPretrain = 1, kFinetune = 2, kTrainNoise = 3, kTestNoise = 4, kTargetNoise = 5 };

std::vector<Image> distort_all(const std::vector<Image>& images, const distortion::Distortion& f,
                               std::uint64_t seed) {
  std::vector<Image> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) out.push_back(f.apply(images[i], stream(seed, i)));
  return out;
}

}  // namespace

std::string HarnessConfig::describe() const {
  std::ostringstream s;
  s.precision(17);
  s << "seed = " << seed << '\n'
    << "classes = " << classes << '\n'
    << "train_per_class = " << train_per_class << '\n'
    << "test_per_class = " << test_per_class << '\n'
    << "width = " << width << '\n';
  describe_options(s, "pretrain", pretrain);
  describe_options(s, "finetune", finetune);
  return s.str();
}

std::string HarnessConfig::hash() const { return fnv1a_hex(describe()); }

Workbench Workbench::prepare(const HarnessConfig& config) {
  Workbench b{config,
              generate_synthetic_dataset(config.seed, config.train_per_class, config.classes, Split::Train),
              generate_synthetic_dataset(config.seed, config.test_per_class, config.classes, Split::Test),
              {}};
  TrainOptions o = config.pretrain;
  o.seed = stream(config.seed, kPretrain);
  b.pretrained = pretrain(b.train, config.width, o);
  return b;
}

TrainOptions finetune_options(const HarnessConfig& config) {
  TrainOptions o = config.finetune;
  o.seed = stream(config.seed, kFinetune);
  return o;
}

cyclegan::DomainDataset source_domain(const HarnessConfig& config) {
  return {"pristine",
          generate_synthetic_dataset(config.seed, config.train_per_class, config.classes, Split::Train).images};
}

cyclegan::DomainDataset target_domain(const HarnessConfig& config, const distortion::Distortion& f,
                                      int per_class) {
  auto val = generate_synthetic_dataset(config.seed, per_class, config.classes, Split::Val);
  return {"distorted", distort_all(val.images, f, stream(config.seed, kTargetNoise))};
}

ScenarioResult run_scenario(const Workbench& bench, const Scenario& scenario) {
  scenario.validate();
  const auto& c = bench.config;
  const LabeledDataset test =
      bench.test.with_images(distort_all(bench.test.images, scenario.distortion, stream(c.seed, kTestNoise)));
  const TrainOptions ft = finetune_options(c);

  Classifier model = bench.pretrained.clone();
  switch (scenario.kind) {
    case ScenarioKind::Baseline:
      break;
    case ScenarioKind::Oracle:
      model = fine_tune(bench.pretrained,
                        bench.train.with_images(distort_all(bench.train.images, scenario.distortion,
                                                            stream(c.seed, kTrainNoise))),
                        ft);
      break;
    case ScenarioKind::Adapted: {
      const fs::path& dir = *scenario.checkpoint;
      if (!fs::exists(dir / "manifest.txt")) throw MissingCheckpoint("no checkpoint at " + dir.string());
      auto g = cyclegan::load_network(dir, "G");
      model = fine_tune(bench.pretrained, bench.train.with_images(cyclegan::emulate(g, bench.train.images)), ft);
      break;
    }
  }
  const Evaluation e = evaluate(model, test);
  return {scenario, e.accuracy, e.per_class, c.hash(), c.seed};
}

std::vector<ScenarioResult> run_scenarios(const HarnessConfig& config, const std::vector<Scenario>& scenarios) {
  for (const auto& s : scenarios) s.validate();
  for (const auto& s : scenarios) {
    if (s.checkpoint && !fs::exists(*s.checkpoint / "manifest.txt")) {
      throw MissingCheckpoint("no checkpoint at " + s.checkpoint->string());
    }
  }
  const Workbench bench = Workbench::prepare(config);
  std::vector<ScenarioResult> out;
  for (const auto& s : scenarios) out.push_back(run_scenario(bench, s));
  return out;
}

void write_results_csv(const fs::path& path, const std::vector<ScenarioResult>& results) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "scenario,distortion,seed,accuracy\n";
  for (const auto& r : results) {
    f << scenario_name(r.scenario.kind) << ',' << r.scenario.distortion.describe() << ',' << r.seed << ','
      << r.accuracy << '\n';
  }
}

}  // namespace camda::harness
