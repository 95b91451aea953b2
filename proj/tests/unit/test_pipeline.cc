#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "mlab/pipeline.h"
#include "test_util.h"

using namespace mlab;
using mlab::testing::TempDir;
namespace fs = std::filesystem;

namespace {

ExperimentConfig TinyConfig(const fs::path& out) {
  ExperimentConfig c = ExperimentConfig::Defaults();
  c.victims.resize(2);
  for (VictimSpec& v : c.victims) {
    v.dqn.network.layer_sizes = {kStateDim, 16, 2};
    v.dqn.total_steps = 1500;
    v.dqn.learning_starts = 200;
    v.dqn.eval_period = 0;
    v.dqn.stop_score = std::numeric_limits<double>::infinity();
  }
  c.demo_counts = {200, 100};
  c.dqfd.network.layer_sizes = {kStateDim, 8, 2};
  c.dqfd.pretraining_steps = 60;
  c.dqfd.interaction_steps = 0;
  c.dqfd.log_period = 20;
  c.adversary.dqn.network.layer_sizes = {kStateDim, 8, 2};
  c.adversary.dqn.total_steps = 300;
  c.adversary.dqn.learning_starts = 100;
  c.adversary.dqn.replay_capacity = 300;
  c.fgsm.max_iterations = 100;
  c.crop.omegas = {0.0, 1.0};
  c.crop.return_episodes = 2;
  c.crop.demo_count = 100;
  c.crop.agreement_states = 50;
  c.crop.transfer_episodes = 1;
  c.evaluation = {2, 3, 2, 50};
  c.output_dir = out.string();
  return c;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> Reports(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const char* f : {"attack.csv", "transfer.csv", "imitation.csv", "crop.csv"}) {
    out[f] = Slurp(root / "reports" / f);
  }
  return out;
}

size_t Lines(const std::string& s) { return static_cast<size_t>(std::count(s.begin(), s.end(), '\n')); }

std::map<std::string, std::string> Statuses(const RunManifest& m) {
  std::map<std::string, std::string> out;
  for (const StageRecord& r : m.stages) out[r.stage + "/" + r.cell] = r.status;
  return out;
}

PipelineOptions Quiet() {
  PipelineOptions o;
  o.quiet = true;
  return o;
}

}  // namespace

TEST_CASE("stage names and seeds") {
  for (const char* name : {"train-target", "collect-demos", "imitate", "attack-train",
                           "attack-eval", "transfer-eval", "crop-eval"}) {
    CHECK(StageName(ParseStage(name)) == name);
  }
  CHECK_THROWS(ParseStage("train"));
  CHECK(CellId("dqn-a", 5000) == "dqn-a-5000");

  ExperimentConfig c = ExperimentConfig::Defaults();
  const auto imitate = StageSeed(c, Stage::kImitate, "dqn-a");
  CHECK(imitate != StageSeed(c, Stage::kImitate, "dqn-b"));
  CHECK(imitate != StageSeed(c, Stage::kAttackTrain, "dqn-a"));
  const auto victim = StageSeed(c, Stage::kTrainTarget, "dqn-a");
  c.master_seed = 7;
  CHECK(imitate != StageSeed(c, Stage::kImitate, "dqn-a"));
  CHECK(victim == StageSeed(c, Stage::kTrainTarget, "dqn-a"));
}

TEST_CASE("pipeline end to end on a tiny configuration") {
  const fs::path root = TempDir("pipeline");
  const ExperimentConfig config = TinyConfig(root / "run");
  const fs::path out = config.output_dir;

  const RunManifest first = RunPipeline(config, Quiet());
  for (const StageRecord& r : first.stages) {
    INFO(r.stage, " ", r.cell, " ", r.error);
    CHECK(r.status == "ran");
  }
  REQUIRE(first.ok());
  CHECK(first.config_hash == ConfigHash(config));
  // 2 victims, 1 crop sweep, 4 cells x 5 stages.
  CHECK(first.stages.size() == 2 + 1 + 4 * 5);

  const auto reports = Reports(out);
  // Header + per-cell (episodes + mean row).
  CHECK(Lines(reports.at("attack.csv")) == 1 + 4 * (3 + 1));
  CHECK(Lines(reports.at("transfer.csv")) == 1 + 4 * (2 + 1));
  CHECK(Lines(reports.at("imitation.csv")) == 1 + 4);
  CHECK(Lines(reports.at("crop.csv")) == 1 + 2);
  CHECK(reports.at("attack.csv").rfind("victim_id,demo_count,episode,regret,perturbations\n", 0) ==
        0);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(fs::exists(out / "config.json"));
  CHECK(ConfigHash(LoadConfig(out / "config.json")) == first.config_hash);

  SUBCASE("rerunning reuses every stage and reproduces the reports") {
    const RunManifest again = RunPipeline(config, Quiet());
    for (const StageRecord& r : again.stages) CHECK(r.status == "cached");
    CHECK(Reports(out) == reports);
  }

  SUBCASE("a fresh directory with the same seed gives identical reports") {
    ExperimentConfig other = config;
    other.output_dir = (root / "run2").string();
    REQUIRE(RunPipeline(other, Quiet()).ok());
    CHECK(Reports(root / "run2") == reports);
  }

  SUBCASE("deleting one output regenerates that stage and its dependents only") {
    const std::string cell = CellId(config.victims[0].id, 200);
    fs::remove(out / "cells" / cell / "q_tilde.ckpt");
    const auto status = Statuses(RunPipeline(config, Quiet()));
    for (const auto& [key, s] : status) {
      const bool dependent = key == "imitate/" + cell || key == "attack-train/" + cell ||
                             key == "attack-eval/" + cell || key == "transfer-eval/" + cell;
      INFO(key);
      CHECK(s == (dependent ? "ran" : "cached"));
    }
    CHECK(Reports(out) == reports);
  }

  SUBCASE("a config change reruns only what it touches") {
    ExperimentConfig changed = config;
    changed.evaluation.attack_episodes = 4;
    const auto status = Statuses(RunPipeline(changed, Quiet()));
    for (const auto& [key, s] : status) {
      INFO(key);
      CHECK(s == (key.rfind("attack-eval/", 0) == 0 ? "ran" : "cached"));
    }
  }

  SUBCASE("failures are recorded and block downstream stages") {
    const std::string cell = CellId(config.victims[1].id, 100);
    fs::remove(out / "cells" / cell / "q_tilde.ckpt");
    std::ofstream(out / "cells" / cell / "demos.bin", std::ios::trunc) << "garbage";
    const RunManifest broken = RunPipeline(config, Quiet());
    CHECK_FALSE(broken.ok());
    const auto status = Statuses(broken);
    CHECK(status.at("imitate/" + cell) == "failed");
    CHECK(status.at("attack-train/" + cell) == "blocked");
    CHECK(status.at("attack-eval/" + cell) == "blocked");
    CHECK(status.at("transfer-eval/" + cell) == "blocked");
    CHECK(status.at("imitate/" + CellId(config.victims[0].id, 100)) == "cached");
    const auto manifest = nlohmann::json::parse(Slurp(out / "manifest.json"));
    CHECK(manifest["ok"] == false);
    bool has_error = false;
    for (const auto& s : manifest["stages"]) has_error = has_error || s.contains("error");
    CHECK(has_error);
  }
}

TEST_CASE("pipeline targets and filters") {
  const fs::path root = TempDir("pipeline_target");
  ExperimentConfig config = TinyConfig(root);
  PipelineOptions o = Quiet();
  o.target = Stage::kImitate;
  o.victim = config.victims[1].id;
  o.demo_count = 100;
  const RunManifest m = RunPipeline(config, o);
  REQUIRE(m.ok());
  std::vector<std::string> ran;
  for (const StageRecord& r : m.stages) ran.push_back(r.stage + "/" + r.cell);
  const std::string cell = CellId(config.victims[1].id, 100);
  CHECK(ran == std::vector<std::string>{"train-target/" + config.victims[1].id,
                                        "collect-demos/" + cell, "imitate/" + cell});
  CHECK_FALSE(fs::exists(root / "reports"));
  CHECK(fs::exists(root / "cells" / cell / "q_tilde.ckpt"));

  o.demo_count = 123;
  CHECK_THROWS(RunPipeline(config, o));
  o.demo_count.reset();
  o.victim = "nobody";
  CHECK_THROWS(RunPipeline(config, o));
}
