#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlab/config.h"
#include "mlab/pipeline.h"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> victim;
  std::optional<size_t> demos;
  std::vector<std::string> overrides;
  bool quiet = false;
};

void AddCommonFlags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON experiment config")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--victim", flags.victim, "restrict to one victim id");
  cmd->add_option("--demos", flags.demos, "restrict to one demonstration count");
  cmd->add_option("--set", flags.overrides, "override a config value, e.g. dqfd.n_step=5");
  cmd->add_flag("-q,--quiet", flags.quiet, "no per-stage progress on stderr");
}

mlab::ExperimentConfig ResolveConfig(const CommonFlags& flags) {
  mlab::ExperimentConfig config = flags.config_path.empty()
                                      ? mlab::ExperimentConfig::Defaults()
                                      : mlab::LoadConfig(flags.config_path);
  config = mlab::ApplyOverrides(config, flags.overrides);
  if (flags.seed) config.master_seed = *flags.seed;
  if (flags.out) config.output_dir = *flags.out;
  config.Validate();
  return config;
}

int RunStage(const CommonFlags& flags, std::optional<mlab::Stage> stage) {
  const mlab::ExperimentConfig config = ResolveConfig(flags);
  mlab::PipelineOptions options;
  options.target = stage;
  options.victim = flags.victim;
  options.demo_count = flags.demos;
  options.quiet = flags.quiet;
  const mlab::RunManifest manifest = mlab::RunPipeline(config, options);
  int failed = 0;
  for (const auto& r : manifest.stages) {
    if (r.status == "failed" || r.status == "blocked") ++failed;
  }
  if (failed) {
    std::fprintf(stderr, "%d stage(s) failed or blocked; see %s/manifest.json\n", failed,
                 config.output_dir.c_str());
  }
  return failed == 0 ? 0 : 1 + std::min(failed, 100);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mlab: policy imitation, perturbation attacks and CRoP on CartPole"};
  app.require_subcommand(1);

  CommonFlags flags;
  struct Command {
    const char* name;
    const char* help;
    std::optional<mlab::Stage> stage;
  };
  const std::vector<Command> commands = {
      {"train-target", "train and evaluate the victim policies", mlab::Stage::kTrainTarget},
      {"collect-demos", "record victim demonstrations", mlab::Stage::kCollectDemos},
      {"imitate", "train imitated Q-functions from demonstrations", mlab::Stage::kImitate},
      {"attack-train", "train perturbation adversaries", mlab::Stage::kAttackTrain},
      {"attack-eval", "evaluate perturbation adversaries", mlab::Stage::kAttackEval},
      {"transfer-eval", "measure FGSM transfer to the victims", mlab::Stage::kTransferEval},
      {"crop-eval", "sweep the CRoP tolerance", mlab::Stage::kCropEval},
      {"pipeline", "run every stage and write the combined reports", std::nullopt},
  };
  std::vector<std::pair<CLI::App*, std::optional<mlab::Stage>>> subs;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    AddCommonFlags(sub, flags);
    subs.emplace_back(sub, c.stage);
  }
  CLI::App* show = app.add_subcommand("show-config", "print the resolved config as JSON");
  AddCommonFlags(show, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (show->parsed()) {
      const mlab::ExperimentConfig config = ResolveConfig(flags);
      std::cout << mlab::ToJson(config).dump(2) << "\n"
                << "hash " << mlab::ConfigHash(config) << "\n";
      return 0;
    }
    for (const auto& [sub, stage] : subs) {
      if (sub->parsed()) return RunStage(flags, stage);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
