#include <doctest.h>

#include <fstream>
#include <sstream>

#include "mlab/config.h"
#include "mlab/report.h"
#include "mlab/seeds.h"
#include "test_util.h"

using namespace mlab;
using mlab::testing::TempDir;

namespace {

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("report headers") {
  CHECK(RenderReport(ReportKind::kAttack, {}) ==
        "victim_id,demo_count,episode,regret,perturbations\n");
  CHECK(RenderReport(ReportKind::kTransfer, {}) ==
        "victim_id,demo_count,episode,crafted,transferred\n");
  CHECK(RenderReport(ReportKind::kCrop, {}) ==
        "omega,mean_return,imitation_agreement,mean_transfers\n");
  CHECK(RenderReport(ReportKind::kTrainingCurve, {}) == "episode,steps,return\n");
  CHECK(RenderReport(ReportKind::kImitationLog, {}) == "step,loss,agreement\n");
  CHECK(RenderReport(ReportKind::kImitationSummary, {}) ==
        "victim_id,demo_count,heldout_agreement,rollout_agreement\n");
  CHECK(ParseReportKind("attack") == ReportKind::kAttack);
  CHECK(ParseReportKind("training-curve") == ReportKind::kTrainingCurve);
  CHECK_THROWS(ParseReportKind("table"));
}

TEST_CASE("real number formatting") {
  CHECK(FormatReal(490.73) == "490.730");
  CHECK(FormatReal(490.730000) == "490.730");
  CHECK(FormatReal(7.12) == "7.12000");
  CHECK(FormatReal(0.0) == "0.00000");
  CHECK(FormatReal(-0.0) == "0.00000");
  CHECK(FormatReal(175.11) == "175.110");
  CHECK(FormatReal(1234567.0) == "1.23457e+06");
  CHECK(FormatReal(1e-7) == "1.00000e-07");
  CHECK(FormatReal(-2.5) == "-2.50000");
  CHECK_THROWS_AS(FormatReal(std::nan("")), ReportSchemaError);
  CHECK_THROWS_AS(FormatReal(1.0 / 0.0), ReportSchemaError);
}

TEST_CASE("report rows are schema checked") {
  const std::vector<ReportRow> good{
      {std::string("dqn-a"), std::int64_t{5000}, std::int64_t{0}, 490.73, std::int64_t{7}},
      {std::string("dqn-a"), std::int64_t{5000}, std::string("mean"), 490.73, 7.12}};
  CHECK(RenderReport(ReportKind::kAttack, good) ==
        "victim_id,demo_count,episode,regret,perturbations\n"
        "dqn-a,5000,0,490.730,7\n"
        "dqn-a,5000,mean,490.730,7.12000\n");

  CHECK_THROWS_AS(RenderReport(ReportKind::kAttack, {{std::string("a"), std::int64_t{1}}}),
                  ReportSchemaError);
  CHECK_THROWS_AS(RenderReport(ReportKind::kAttack, {{std::int64_t{1}, std::int64_t{1},
                                                      std::int64_t{0}, 1.0, 1.0}}),
                  ReportSchemaError);
  CHECK_THROWS_AS(RenderReport(ReportKind::kAttack, {{std::string("a"), 1.5, std::int64_t{0},
                                                      1.0, 1.0}}),
                  ReportSchemaError);
  CHECK_THROWS_AS(RenderReport(ReportKind::kAttack, {{std::string("a"), std::int64_t{1}, 0.5,
                                                      1.0, 1.0}}),
                  ReportSchemaError);
  CHECK_THROWS_AS(RenderReport(ReportKind::kAttack, {{std::string("a,b"), std::int64_t{1},
                                                      std::int64_t{0}, 1.0, 1.0}}),
                  ReportSchemaError);
  CHECK_THROWS_AS(RenderReport(ReportKind::kCrop, {{0.0, 1.0, std::string("x"), 0.0}}),
                  ReportSchemaError);
}

TEST_CASE("written reports use LF endings and exact bytes") {
  const auto dir = TempDir("report");
  const std::vector<ReportRow> rows{{std::int64_t{0}, std::int64_t{12}, 12.0},
                                    {std::int64_t{1}, std::int64_t{500}, 500.0}};
  WriteReport(dir / "sub" / "curve.csv", ReportKind::kTrainingCurve, rows);
  const std::string text = Slurp(dir / "sub" / "curve.csv");
  CHECK(text == "episode,steps,return\n0,12,12.0000\n1,500,500.000\n");
  CHECK(text.find('\r') == std::string::npos);
  WriteReport(dir / "empty.csv", ReportKind::kCrop, {});
  CHECK(Slurp(dir / "empty.csv") == "omega,mean_return,imitation_agreement,mean_transfers\n");
}

TEST_CASE("seed derivation") {
  CHECK(DeriveSeed(0, "imitate", "dqn-a") == DeriveSeed(0, "imitate", "dqn-a"));
  CHECK(DeriveSeed(0, "imitate", "dqn-a") != DeriveSeed(1, "imitate", "dqn-a"));
  CHECK(DeriveSeed(0, "imitate", "dqn-a") != DeriveSeed(0, "attack-train", "dqn-a"));
  CHECK(DeriveSeed(0, "imitate", "dqn-a") != DeriveSeed(0, "imitate", "dqn-b"));
  // The separator keeps (stage, cell) boundaries distinct.
  CHECK(DeriveSeed(0, "ab", "c") != DeriveSeed(0, "a", "bc"));
  CHECK(DeriveSeed(5, 0) != DeriveSeed(5, 1));
  CHECK(Fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(Fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(HexDigest(0xabcULL) == "0000000000000abc");
}

TEST_CASE("default config") {
  const ExperimentConfig d = ExperimentConfig::Defaults();
  CHECK_NOTHROW(d.Validate());
  REQUIRE(d.victims.size() == 3);
  CHECK(d.victims[0].dqn.network.layer_sizes == std::vector<int>{4, 64, 64, 2});
  CHECK(d.victims[1].dqn.network.layer_sizes == std::vector<int>{4, 32, 32, 2});
  CHECK(d.victims[2].dqn.network.layer_sizes == std::vector<int>{4, 128, 2});
  CHECK(d.demo_counts == std::vector<size_t>{5000, 2500, 1000});
  CHECK(d.dqfd.pretraining_steps == 5000);
  CHECK(d.dqfd.margin == 0.8);
  CHECK(d.dqfd.lambda_margin == 1.0);
  CHECK(d.dqfd.target_update_period == 1000);
  CHECK(d.dqfd.n_step == 10);
  CHECK(d.dqfd.gamma == 0.99);
  CHECK(d.adversary.r_max == 500.0);
  CHECK(d.fgsm.eps == 0.01);

  // The checked-in file carries the same values.
  const ExperimentConfig file = LoadConfig(std::filesystem::path(MLAB_SOURCE_DIR) /
                                           "configs" / "default.json");
  CHECK(ConfigHash(file) == ConfigHash(d));
}

TEST_CASE("config JSON round trip and hashing") {
  ExperimentConfig c = ExperimentConfig::Defaults();
  c.dqfd.n_step = 3;
  c.crop.omegas = {0.0, 0.5};
  c.victims[1].dqn.stop_score = 480.0;
  const ExperimentConfig back = FromJson(ToJson(c));
  CHECK(ToJson(back) == ToJson(c));
  CHECK(ConfigHash(back) == ConfigHash(c));
  CHECK(ConfigHash(c) == ConfigHash(c));

  ExperimentConfig other = c;
  other.master_seed = 1;
  CHECK(ConfigHash(other) != ConfigHash(c));

  const auto dir = TempDir("config");
  SaveConfig(dir / "c.json", c);
  CHECK(ConfigHash(LoadConfig(dir / "c.json")) == ConfigHash(c));

  // Missing keys keep their defaults.
  const ExperimentConfig partial = FromJson(nlohmann::json{{"master_seed", 9}});
  CHECK(partial.master_seed == 9);
  CHECK(partial.dqfd.pretraining_steps == 5000);
}

TEST_CASE("config errors") {
  using nlohmann::json;
  CHECK_THROWS_WITH(FromJson(json{{"mastr_seed", 1}}), doctest::Contains("mastr_seed"));
  CHECK_THROWS(FromJson(json{{"dqfd", {{"margn", 0.8}}}}));
  CHECK_THROWS(FromJson(json{{"dqfd", {{"margin", "big"}}}}));
  CHECK_THROWS(FromJson(json{{"dqfd", {{"gamma", 1.5}}}}));
  CHECK_THROWS(FromJson(json{{"heldout_fraction", 1.0}}));
  CHECK_THROWS(FromJson(json{{"demo_counts", json::array()}}));
  CHECK_THROWS(FromJson(json{{"crop", {{"omegas", {-1.0}}}}}));
  CHECK_THROWS(FromJson(json{{"crop", {{"victim", "nobody"}}}}));
  json dup = ToJson(ExperimentConfig::Defaults());
  dup["victims"][1]["id"] = "dqn-a";
  CHECK_THROWS_WITH(FromJson(dup), doctest::Contains("duplicate"));
  json bad_id = ToJson(ExperimentConfig::Defaults());
  bad_id["victims"][0]["id"] = "a/b";
  CHECK_THROWS(FromJson(bad_id));
  json bad_net = ToJson(ExperimentConfig::Defaults());
  bad_net["victims"][0]["dqn"]["network"]["layers"] = {4, 8, 3};
  CHECK_THROWS(FromJson(bad_net));
  const auto dir = TempDir("config_err");
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS(LoadConfig(dir / "broken.json"));
  CHECK_THROWS(LoadConfig(dir / "missing.json"));
}

TEST_CASE("config overrides") {
  const ExperimentConfig d = ExperimentConfig::Defaults();
  const ExperimentConfig c = ApplyOverrides(
      d, {"dqfd.n_step=5", "output_dir=runs/x", "victims.0.dqn.total_steps=1000",
          "crop.omegas=[0, 1]", "fgsm.refresh_gradient=false"});
  CHECK(c.dqfd.n_step == 5);
  CHECK(c.output_dir == "runs/x");
  CHECK(c.victims[0].dqn.total_steps == 1000);
  CHECK(c.crop.omegas == std::vector<double>{0.0, 1.0});
  CHECK_FALSE(c.fgsm.refresh_gradient);
  CHECK(c.dqfd.margin == d.dqfd.margin);
  CHECK_THROWS(ApplyOverrides(d, {"dqfd.nstep=5"}));
  CHECK_THROWS(ApplyOverrides(d, {"dqfd.n_step"}));
  CHECK_THROWS(ApplyOverrides(d, {"dqfd.n_step=0"}));
  CHECK_THROWS(ApplyOverrides(d, {"dqfd.n_step=many"}));
}
