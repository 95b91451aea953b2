#include "mlab/pipeline.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "mlab/adversary.h"
#include "mlab/checkpoint.h"
#include "mlab/crop.h"
#include "mlab/demonstrations.h"
#include "mlab/dqfd.h"
#include "mlab/dqn.h"
#include "mlab/report.h"
#include "mlab/seeds.h"
#include "mlab/transfer.h"

namespace mlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr Stage kAllStages[] = {Stage::kTrainTarget,  Stage::kCollectDemos,
                                Stage::kImitate,      Stage::kAttackTrain,
                                Stage::kAttackEval,   Stage::kTransferEval,
                                Stage::kCropEval};

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("short write to " + path.string());
}

std::vector<ReportRow> CurveRows(const std::vector<EpisodeRecord>& curve) {
  std::vector<ReportRow> rows;
  rows.reserve(curve.size());
  for (const EpisodeRecord& e : curve) {
    rows.push_back({e.episode, e.steps, e.episode_return});
  }
  return rows;
}

std::string Key(const json& parts) { return HexDigest(Fnv1a64(parts.dump())); }

// Drops the header line of a rendered report.
std::string Body(const std::string& csv) {
  const auto nl = csv.find('\n');
  return nl == std::string::npos ? std::string() : csv.substr(nl + 1);
}

class Runner {
 public:
  Runner(const ExperimentConfig& config, const PipelineOptions& options)
      : config_(config), options_(options), root_(config.output_dir) {}

  RunManifest& manifest() { return manifest_; }
  const fs::path& root() const { return root_; }

  // Returns the stage key, or nullopt when the stage failed or was blocked.
  std::optional<std::string> Run(Stage stage, const std::string& cell,
                                 const fs::path& dir, const json& key_parts,
                                 const std::vector<std::optional<std::string>>& inputs,
                                 const std::vector<std::string>& outputs,
                                 const std::function<void()>& body) {
    StageRecord record;
    record.stage = std::string(StageName(stage));
    record.cell = cell;
    for (const std::string& o : outputs) {
      record.outputs.push_back(fs::relative(dir / o, root_).generic_string());
    }

    bool input_rebuilt = false;
    json parts = key_parts;
    parts["stage"] = record.stage;
    json upstream = json::array();
    for (const auto& in : inputs) {
      if (!in) {
        record.status = "blocked";
        Log(record);
        manifest_.stages.push_back(std::move(record));
        return std::nullopt;
      }
      upstream.push_back(*in);
      if (rebuilt_.count(*in)) input_rebuilt = true;
    }
    parts["inputs"] = upstream;
    const std::string key = Key(parts);
    const fs::path stamp = dir / ("." + record.stage + ".stamp");

    bool fresh = !input_rebuilt && fs::exists(stamp);
    if (fresh) {
      try {
        fresh = ReadText(stamp) == key + "\n";
      } catch (const std::exception&) {
        fresh = false;
      }
    }
    for (const std::string& o : outputs) fresh = fresh && fs::exists(dir / o);
    if (fresh) {
      record.status = "cached";
      Log(record);
      manifest_.stages.push_back(std::move(record));
      return key;
    }

    const auto start = std::chrono::steady_clock::now();
    try {
      fs::create_directories(dir);
      fs::remove(stamp);
      body();
      WriteText(stamp, key + "\n");
      record.status = "ran";
      rebuilt_.insert(key);
    } catch (const std::exception& e) {
      record.status = "failed";
      record.error = e.what();
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Log(record);
    const bool ok = record.status == "ran";
    manifest_.stages.push_back(std::move(record));
    if (!ok) return std::nullopt;
    return key;
  }

 private:
  void Log(const StageRecord& r) const {
    if (options_.quiet) return;
    std::fprintf(stderr, "[%s] %s %s", r.stage.c_str(), r.cell.c_str(), r.status.c_str());
    if (r.status == "ran") std::fprintf(stderr, " (%.1fs)", r.seconds);
    if (!r.error.empty()) std::fprintf(stderr, ": %s", r.error.c_str());
    std::fprintf(stderr, "\n");
  }

  const ExperimentConfig& config_;
  const PipelineOptions& options_;
  fs::path root_;
  RunManifest manifest_;
  std::set<std::string> rebuilt_;
};

std::shared_ptr<const Network> LoadNet(const fs::path& path) {
  return std::make_shared<const Network>(LoadCheckpoint(path));
}

// Stages needed to produce `target`.
std::set<Stage> Closure(Stage target) {
  switch (target) {
    case Stage::kTrainTarget: return {Stage::kTrainTarget};
    case Stage::kCollectDemos: return {Stage::kTrainTarget, Stage::kCollectDemos};
    case Stage::kImitate:
      return {Stage::kTrainTarget, Stage::kCollectDemos, Stage::kImitate};
    case Stage::kAttackTrain:
      return {Stage::kTrainTarget, Stage::kCollectDemos, Stage::kImitate,
              Stage::kAttackTrain};
    case Stage::kAttackEval:
      return {Stage::kTrainTarget, Stage::kCollectDemos, Stage::kImitate,
              Stage::kAttackTrain, Stage::kAttackEval};
    case Stage::kTransferEval:
      return {Stage::kTrainTarget, Stage::kCollectDemos, Stage::kImitate,
              Stage::kTransferEval};
    case Stage::kCropEval: return {Stage::kTrainTarget, Stage::kCropEval};
  }
  throw std::logic_error("unknown stage");
}

}  // namespace

std::string_view StageName(Stage stage) {
  switch (stage) {
    case Stage::kTrainTarget: return "train-target";
    case Stage::kCollectDemos: return "collect-demos";
    case Stage::kImitate: return "imitate";
    case Stage::kAttackTrain: return "attack-train";
    case Stage::kAttackEval: return "attack-eval";
    case Stage::kTransferEval: return "transfer-eval";
    case Stage::kCropEval: return "crop-eval";
  }
  throw std::logic_error("unknown stage");
}

Stage ParseStage(std::string_view name) {
  for (Stage s : kAllStages) {
    if (StageName(s) == name) return s;
  }
  throw std::invalid_argument("unknown stage: " + std::string(name));
}

bool RunManifest::ok() const {
  for (const StageRecord& r : stages) {
    if (r.status == "failed" || r.status == "blocked") return false;
  }
  return true;
}

json RunManifest::ToJson() const {
  json stages_json = json::array();
  for (const StageRecord& r : stages) {
    json s{{"stage", r.stage},
           {"cell", r.cell},
           {"status", r.status},
           {"seconds", r.seconds},
           {"outputs", r.outputs}};
    if (!r.error.empty()) s["error"] = r.error;
    stages_json.push_back(std::move(s));
  }
  return {{"config_hash", config_hash},
          {"tool_version", tool_version},
          {"ok", ok()},
          {"stages", stages_json}};
}

std::uint64_t StageSeed(const ExperimentConfig& config, Stage stage,
                        std::string_view victim_id) {
  if (stage == Stage::kTrainTarget) {
    // Victims depend on the roster only, not on the master seed.
    return DeriveSeed(config.victim(std::string(victim_id)).dqn.seed, StageName(stage),
                      victim_id);
  }
  return DeriveSeed(config.master_seed, StageName(stage), victim_id);
}

std::string CellId(std::string_view victim_id, size_t demo_count) {
  return std::string(victim_id) + "-" + std::to_string(demo_count);
}

RunManifest RunPipeline(const ExperimentConfig& config, const PipelineOptions& options) {
  config.Validate();
  if (options.victim) config.victim(*options.victim);
  Runner runner(config, options);
  RunManifest& manifest = runner.manifest();
  manifest.config_hash = ConfigHash(config);
  const fs::path root = runner.root();
  fs::create_directories(root);
  SaveConfig(root / "config.json", config);
  const json config_json = ToJson(config);

  const std::set<Stage> wanted =
      options.target ? Closure(*options.target)
                     : std::set<Stage>(std::begin(kAllStages), std::end(kAllStages));
  const std::string& crop_id =
      config.crop_victim.empty() ? config.victims.front().id : config.crop_victim;

  std::vector<const VictimSpec*> victims;
  for (const VictimSpec& v : config.victims) {
    if (options.victim && v.id != *options.victim) continue;
    if (!options.victim && options.target == Stage::kCropEval && v.id != crop_id) continue;
    victims.push_back(&v);
  }
  std::vector<size_t> demo_counts;
  for (size_t n : config.demo_counts) {
    if (!options.demo_count || n == *options.demo_count) demo_counts.push_back(n);
  }
  if (options.demo_count && demo_counts.empty()) {
    throw std::invalid_argument("demo count " + std::to_string(*options.demo_count) +
                                " is not in the configured list");
  }

  std::vector<std::string> cell_dirs;
  for (const VictimSpec* v : victims) {
    const std::string& id = v->id;
    const fs::path vdir = root / "victims" / id;

    const std::optional<std::string> victim_key = runner.Run(
        Stage::kTrainTarget, id, vdir,
        {{"dqn", DqnConfigToJson(v->dqn)},
         {"episodes", config.evaluation.victim_episodes},
         {"seed", StageSeed(config, Stage::kTrainTarget, id)}},
        {}, {"q.ckpt", "training_curve.csv", "eval.json"}, [&] {
          const DqnResult trained = TrainVictim(v->dqn);
          SaveCheckpoint(vdir / "q.ckpt", trained.network);
          WriteReport(vdir / "training_curve.csv", ReportKind::kTrainingCurve,
                      CurveRows(trained.curve));
          const EvalStats stats =
              EvaluatePolicy(Policy::Greedy(std::make_shared<const Network>(trained.network)),
                             config.evaluation.victim_episodes,
                             StageSeed(config, Stage::kTrainTarget, id));
          const json eval{{"mean", stats.mean},
                          {"min", stats.min},
                          {"max", stats.max},
                          {"returns", stats.returns},
                          {"steps_taken", trained.steps_taken}};
          WriteText(vdir / "eval.json", eval.dump(2) + "\n");
        });

    if (wanted.count(Stage::kCropEval) && id == crop_id) {
      const fs::path cdir = root / "crop";
      CropEvalConfig crop = config.crop;
      crop.dqfd = config.dqfd;
      crop.fgsm = config.fgsm;
      const std::uint64_t seed = StageSeed(config, Stage::kCropEval, id);
      runner.Run(Stage::kCropEval, id, cdir,
                 {{"omegas", crop.omegas},
                  {"literal", crop.literal_inequality},
                  {"return_episodes", crop.return_episodes},
                  {"demo_count", crop.demo_count},
                  {"agreement_states", crop.agreement_states},
                  {"transfer_episodes", crop.transfer_episodes},
                  {"dqfd", DqfdConfigToJson(crop.dqfd)},
                  {"fgsm", config_json["fgsm"]},
                  {"seed", seed}},
                 {victim_key}, {"crop.csv"}, [&] {
                   const std::vector<CropRow> rows =
                       EvaluateCrop(LoadNet(vdir / "q.ckpt"), crop, seed);
                   std::vector<ReportRow> report;
                   for (const CropRow& r : rows) {
                     report.push_back({r.omega, r.mean_return, r.imitation_agreement,
                                       r.mean_transfers});
                   }
                   WriteReport(cdir / "crop.csv", ReportKind::kCrop, report);
                 });
    }

    if (!wanted.count(Stage::kCollectDemos)) continue;
    for (size_t n : demo_counts) {
      const std::string cell = CellId(id, n);
      const fs::path dir = root / "cells" / cell;
      cell_dirs.push_back(cell);

      // One collection seed per victim: smaller sets are prefixes of larger ones.
      const std::uint64_t demo_seed = StageSeed(config, Stage::kCollectDemos, id);
      const std::optional<std::string> demos_key = runner.Run(
          Stage::kCollectDemos, cell, dir, {{"count", n}, {"seed", demo_seed}},
          {victim_key}, {"demos.bin"}, [&] {
            const DemonstrationSet demos =
                CollectDemonstrations(Policy::Greedy(LoadNet(vdir / "q.ckpt")), n, demo_seed);
            SaveDemonstrations(dir / "demos.bin", demos);
          });
      if (!wanted.count(Stage::kImitate)) continue;

      DqfdConfig dqfd = config.dqfd;
      dqfd.seed = StageSeed(config, Stage::kImitate, id);
      dqfd.network.seed = DeriveSeed(dqfd.seed, 0);
      const std::uint64_t agreement_seed = DeriveSeed(dqfd.seed, 1);
      const std::optional<std::string> imitate_key = runner.Run(
          Stage::kImitate, cell, dir,
          {{"dqfd", DqfdConfigToJson(dqfd)},
           {"heldout_fraction", config.heldout_fraction},
           {"agreement_states", config.evaluation.agreement_states},
           {"agreement_seed", agreement_seed}},
          {demos_key, victim_key}, {"q_tilde.ckpt", "imitation_log.csv", "imitation.csv"},
          [&] {
            const DemonstrationSet demos = LoadDemonstrations(dir / "demos.bin");
            const auto [train, heldout] = SplitByEpisode(demos, config.heldout_fraction);
            const DqfdResult result = TrainDqfd(train, dqfd);
            SaveCheckpoint(dir / "q_tilde.ckpt", result.q);
            std::vector<ReportRow> log;
            for (const ImitationLogRow& r : result.log) {
              log.push_back({r.step, r.loss, r.agreement});
            }
            WriteReport(dir / "imitation_log.csv", ReportKind::kImitationLog, log);
            const auto q = std::make_shared<const Network>(result.q);
            const double rollout =
                RolloutAgreement(ImitatedPolicy(q), Policy::Greedy(LoadNet(vdir / "q.ckpt")),
                                 config.evaluation.agreement_states, agreement_seed);
            WriteReport(dir / "imitation.csv", ReportKind::kImitationSummary,
                        {{id, static_cast<std::int64_t>(n), DemoAgreement(result.q, heldout),
                          rollout}});
          });

      if (wanted.count(Stage::kAttackTrain)) {
        AdversaryConfig adversary = config.adversary;
        adversary.dqn.seed = StageSeed(config, Stage::kAttackTrain, id);
        adversary.dqn.network.seed = DeriveSeed(adversary.dqn.seed, 0);
        const std::optional<std::string> train_key = runner.Run(
            Stage::kAttackTrain, cell, dir,
            {{"adversary", config_json["adversary"]},
             {"seed", adversary.dqn.seed},
             {"network_seed", adversary.dqn.network.seed}},
            {imitate_key, victim_key}, {"adversary.ckpt", "adversary_curve.csv"}, [&] {
              const DqnResult trained =
                  TrainAdversary(Policy::Greedy(LoadNet(vdir / "q.ckpt")),
                                 LoadNet(dir / "q_tilde.ckpt"), adversary);
              SaveCheckpoint(dir / "adversary.ckpt", trained.network);
              WriteReport(dir / "adversary_curve.csv", ReportKind::kTrainingCurve,
                          CurveRows(trained.curve));
            });

        if (wanted.count(Stage::kAttackEval)) {
          const std::uint64_t seed = StageSeed(config, Stage::kAttackEval, id);
          runner.Run(
              Stage::kAttackEval, cell, dir,
              {{"episodes", config.evaluation.attack_episodes},
               {"cost", adversary.perturbation_cost},
               {"r_max", adversary.r_max},
               {"seed", seed}},
              {train_key, imitate_key, victim_key}, {"attack.csv"}, [&] {
                const AttackReport report = EvaluateAttack(
                    LoadCheckpoint(dir / "adversary.ckpt"),
                    Policy::Greedy(LoadNet(vdir / "q.ckpt")), LoadNet(dir / "q_tilde.ckpt"),
                    adversary, config.evaluation.attack_episodes, seed);
                std::vector<ReportRow> rows;
                for (size_t e = 0; e < report.episodes.size(); ++e) {
                  const AttackEpisode& ep = report.episodes[e];
                  const double identity = (adversary.r_max - ep.victim_return) -
                                          adversary.perturbation_cost * ep.perturbations;
                  if (std::abs(ep.adversary_return - identity) >
                      1e-9 * (1.0 + std::abs(identity))) {
                    throw std::logic_error("attack accounting identity violated in episode " +
                                           std::to_string(e));
                  }
                  rows.push_back({id, static_cast<std::int64_t>(n),
                                  static_cast<std::int64_t>(e), ep.regret,
                                  static_cast<std::int64_t>(ep.perturbations)});
                }
                rows.push_back({id, static_cast<std::int64_t>(n), std::string("mean"),
                                report.mean_regret, report.mean_perturbations});
                WriteReport(dir / "attack.csv", ReportKind::kAttack, rows);
              });
        }
      }

      if (wanted.count(Stage::kTransferEval)) {
        const std::uint64_t seed = StageSeed(config, Stage::kTransferEval, id);
        runner.Run(Stage::kTransferEval, cell, dir,
                   {{"episodes", config.evaluation.transfer_episodes},
                    {"fgsm", config_json["fgsm"]},
                    {"seed", seed}},
                   {imitate_key, victim_key}, {"transfer.csv"}, [&] {
                     const TransferReport report = RunTransferEval(
                         Policy::Greedy(LoadNet(vdir / "q.ckpt")),
                         LoadCheckpoint(dir / "q_tilde.ckpt"),
                         config.evaluation.transfer_episodes, config.fgsm, seed);
                     std::vector<ReportRow> rows;
                     for (size_t e = 0; e < report.episodes.size(); ++e) {
                       rows.push_back({id, static_cast<std::int64_t>(n),
                                       static_cast<std::int64_t>(e),
                                       static_cast<std::int64_t>(report.episodes[e].crafted),
                                       static_cast<std::int64_t>(
                                           report.episodes[e].transferred)});
                     }
                     rows.push_back({id, static_cast<std::int64_t>(n), std::string("mean"),
                                     report.mean_crafted, report.mean_transferred});
                     WriteReport(dir / "transfer.csv", ReportKind::kTransfer, rows);
                   });
      }
    }
  }

  if (!options.target) {
    const fs::path reports = root / "reports";
    try {
      auto combine = [&](ReportKind kind, const std::string& file) {
        std::string text = RenderReport(kind, {});
        for (const std::string& cell : cell_dirs) {
          const fs::path p = root / "cells" / cell / file;
          if (fs::exists(p)) text += Body(ReadText(p));
        }
        WriteText(reports / file, text);
      };
      combine(ReportKind::kAttack, "attack.csv");
      combine(ReportKind::kTransfer, "transfer.csv");
      combine(ReportKind::kImitationSummary, "imitation.csv");
      const fs::path crop = root / "crop" / "crop.csv";
      WriteText(reports / "crop.csv",
                fs::exists(crop) ? ReadText(crop) : RenderReport(ReportKind::kCrop, {}));
    } catch (const std::exception& e) {
      manifest.stages.push_back({"reports", "", "failed", 0.0, {}, e.what()});
    }
  }

  WriteText(root / "manifest.json", manifest.ToJson().dump(2) + "\n");
  return manifest;
}

}  // namespace mlab
