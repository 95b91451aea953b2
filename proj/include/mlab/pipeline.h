#pragma once

// End-to-end experiment: victims -> demonstrations -> imitation -> adversary
// -> attack / transfer evaluation, plus the CRoP sweep.
//
// Output layout under the output directory:
//   config.json, manifest.json
//   victims/<id>/        q.ckpt, training_curve.csv, eval.json
//   cells/<id>-<n>/      demos.bin, q_tilde.ckpt, imitation_log.csv,
//                        imitation.csv, adversary.ckpt, adversary_curve.csv,
//                        attack.csv, transfer.csv
//   crop/                crop.csv
//   reports/             attack.csv, transfer.csv, imitation.csv, crop.csv
//
// Each stage leaves a stamp next to its outputs holding a key derived from
// its configuration and the keys of its inputs. A stage is skipped when the
// stamp matches and all outputs exist, unless one of its inputs was rebuilt
// in the same run.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mlab/config.h"

namespace mlab {

enum class Stage {
  kTrainTarget,
  kCollectDemos,
  kImitate,
  kAttackTrain,
  kAttackEval,
  kTransferEval,
  kCropEval,
};

std::string_view StageName(Stage stage);
Stage ParseStage(std::string_view name);

inline constexpr std::string_view kToolVersion = "0.1.0";

struct StageRecord {
  std::string stage;
  std::string cell;  // victim id, "<id>-<n>", or the crop victim
  std::string status;  // "ran", "cached", "failed", "blocked"
  double seconds = 0.0;
  std::vector<std::string> outputs;  // relative to the output directory
  std::string error;
};

struct RunManifest {
  std::string config_hash;
  std::string tool_version{kToolVersion};
  std::vector<StageRecord> stages;

  bool ok() const;
  nlohmann::json ToJson() const;
};

struct PipelineOptions {
  // Run this stage (and whatever it needs); empty runs everything and
  // writes the combined reports.
  std::optional<Stage> target;
  std::optional<std::string> victim;
  std::optional<size_t> demo_count;
  bool quiet = false;
};

// Seed of a stage. Imitation, adversary and evaluation seeds depend on the
// victim only, so cells that differ only in demo count share them.
std::uint64_t StageSeed(const ExperimentConfig& config, Stage stage,
                        std::string_view victim_id);

std::string CellId(std::string_view victim_id, size_t demo_count);

// Never throws for stage failures: they are recorded in the manifest, which
// is also written to <output_dir>/manifest.json.
RunManifest RunPipeline(const ExperimentConfig& config,
                        const PipelineOptions& options = {});

}  // namespace mlab
