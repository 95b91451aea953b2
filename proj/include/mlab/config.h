#pragma once

// Experiment configuration: JSON on disk, with every key optional (missing
// keys keep the defaults below). Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlab/adversary.h"
#include "mlab/crop.h"
#include "mlab/dqfd.h"
#include "mlab/dqn.h"
#include "mlab/transfer.h"

namespace mlab {

struct VictimSpec {
  std::string id;
  DqnConfig dqn;
};

struct EvaluationConfig {
  int victim_episodes = 100;
  int attack_episodes = 100;
  int transfer_episodes = 100;
  int agreement_states = 1000;
};

struct ExperimentConfig {
  std::vector<VictimSpec> victims;
  std::vector<size_t> demo_counts{5000, 2500, 1000};
  double heldout_fraction = 0.2;
  DqfdConfig dqfd;
  AdversaryConfig adversary;
  FgsmConfig fgsm;
  std::string crop_victim;  // empty: first roster entry
  CropEvalConfig crop;
  EvaluationConfig evaluation;
  std::string output_dir = "out";
  std::uint64_t master_seed = 0;

  // Roster and hyperparameters used when no file is given.
  static ExperimentConfig Defaults();

  void Validate() const;
  const VictimSpec& victim(const std::string& id) const;
};

nlohmann::json DqnConfigToJson(const DqnConfig& c);
DqnConfig DqnConfigFromJson(const nlohmann::json& j, const DqnConfig& defaults);
nlohmann::json DqfdConfigToJson(const DqfdConfig& c);
DqfdConfig DqfdConfigFromJson(const nlohmann::json& j, const DqfdConfig& defaults);

nlohmann::json ToJson(const ExperimentConfig& config);
// Keys absent from `j` keep their value from `defaults`.
ExperimentConfig FromJson(const nlohmann::json& j,
                          const ExperimentConfig& defaults = ExperimentConfig::Defaults());

ExperimentConfig LoadConfig(const std::filesystem::path& path);
void SaveConfig(const std::filesystem::path& path, const ExperimentConfig& config);

// Applies "a.b.c=<json value>" overrides (bare words are taken as strings).
ExperimentConfig ApplyOverrides(const ExperimentConfig& config,
                                const std::vector<std::string>& assignments);

// Stable hex digest of the canonical JSON form.
std::string ConfigHash(const ExperimentConfig& config);

}  // namespace mlab
