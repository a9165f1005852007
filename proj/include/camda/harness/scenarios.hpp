#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "camda/cyclegan/trainer.hpp"
#include "camda/distortion/camera.hpp"
#include "camda/harness/classifier.hpp"

namespace camda::harness {

enum class ScenarioKind { Baseline, Oracle, Adapted };
std::string scenario_name(ScenarioKind kind);
ScenarioKind parse_scenario(const std::string& name);

struct Scenario {
  ScenarioKind kind = ScenarioKind::Baseline;
  distortion::Distortion distortion;
  std::optional<std::filesystem::path> checkpoint;  // adapted only: holds network "G"

  /// Throws std::invalid_argument unless baseline and oracle carry no
  /// checkpoint and adapted carries one.
  void validate() const;
};

struct ScenarioResult {
  Scenario scenario;
  double accuracy = 0;
  std::vector<double> per_class;
  std::string config_hash;
  std::uint64_t seed = 0;
};

class MissingCheckpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HarnessConfig {
  std::uint64_t seed = 0;
  int classes = 4;
  int train_per_class = 200;
  int test_per_class = 50;
  int width = 16;
  TrainOptions pretrain{3000, 16, 1e-3, 0.75, 0.1, 0};
  TrainOptions finetune{500, 16, 1e-3, 0.75, 0.1, 0};

  /// Key-value rendering used for the config hash.
  std::string describe() const;
  std::string hash() const;
};

/// The pristine datasets and pretrained model shared by all scenarios of
/// one seed.
struct Workbench {
  HarnessConfig config;
  LabeledDataset train, test;
  Classifier pretrained;

  static Workbench prepare(const HarnessConfig& config);
};

/// Fine-tuning options with the seed every scenario of `config` uses.
TrainOptions finetune_options(const HarnessConfig& config);

/// Baseline evaluates the pretrained model; oracle fine-tunes on f(train);
/// adapted fine-tunes on G(train) for the checkpoint's G. The test split is
/// always distorted by the true f.
ScenarioResult run_scenario(const Workbench& bench, const Scenario& scenario);
std::vector<ScenarioResult> run_scenarios(const HarnessConfig& config, const std::vector<Scenario>& scenarios);

/// Unpaired domains for learning f-hat: X is the pristine train split, Y
/// the val split under the true f with labels dropped.
cyclegan::DomainDataset source_domain(const HarnessConfig& config);
cyclegan::DomainDataset target_domain(const HarnessConfig& config, const distortion::Distortion& f,
                                      int per_class);

/// Header `scenario,distortion,seed,accuracy`.
void write_results_csv(const std::filesystem::path& path, const std::vector<ScenarioResult>& results);

/// FNV-1a 64-bit, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace camda::harness
