#include "mlab/config.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "mlab/seeds.h"

namespace mlab {

using nlohmann::json;

namespace {

void RejectUnknownKeys(const json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void Read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json SpecToJson(const NetworkSpec& spec) {
  return {{"layers", spec.layer_sizes}, {"seed", spec.seed}};
}

NetworkSpec SpecFromJson(const json& j, NetworkSpec spec) {
  RejectUnknownKeys(j, {"layers", "seed"}, "network");
  Read(j, "layers", spec.layer_sizes);
  Read(j, "seed", spec.seed);
  return spec;
}

// Infinity has no JSON literal; null stands for "never".
json StopScoreToJson(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

}  // namespace

json DqnConfigToJson(const DqnConfig& c) {
  return {{"network", SpecToJson(c.network)},
          {"replay_capacity", c.replay_capacity},
          {"batch_size", c.batch_size},
          {"gamma", c.gamma},
          {"target_update_period", c.target_update_period},
          {"epsilon_start", c.epsilon_start},
          {"epsilon_end", c.epsilon_end},
          {"epsilon_decay_steps", c.epsilon_decay_steps},
          {"total_steps", c.total_steps},
          {"learning_rate", c.learning_rate},
          {"learning_starts", c.learning_starts},
          {"train_period", c.train_period},
          {"huber_delta", c.huber_delta},
          {"eval_period", c.eval_period},
          {"eval_episodes", c.eval_episodes},
          {"stop_score", StopScoreToJson(c.stop_score)},
          {"seed", c.seed}};
}

DqnConfig DqnConfigFromJson(const json& j, const DqnConfig& defaults) {
  RejectUnknownKeys(j,
                    {"network", "replay_capacity", "batch_size", "gamma",
                     "target_update_period", "epsilon_start", "epsilon_end",
                     "epsilon_decay_steps", "total_steps", "learning_rate",
                     "learning_starts", "train_period", "huber_delta", "eval_period",
                     "eval_episodes", "stop_score", "seed"},
                    "dqn");
  DqnConfig c = defaults;
  if (j.contains("network")) c.network = SpecFromJson(j.at("network"), c.network);
  Read(j, "replay_capacity", c.replay_capacity);
  Read(j, "batch_size", c.batch_size);
  Read(j, "gamma", c.gamma);
  Read(j, "target_update_period", c.target_update_period);
  Read(j, "epsilon_start", c.epsilon_start);
  Read(j, "epsilon_end", c.epsilon_end);
  Read(j, "epsilon_decay_steps", c.epsilon_decay_steps);
  Read(j, "total_steps", c.total_steps);
  Read(j, "learning_rate", c.learning_rate);
  Read(j, "learning_starts", c.learning_starts);
  Read(j, "train_period", c.train_period);
  Read(j, "huber_delta", c.huber_delta);
  Read(j, "eval_period", c.eval_period);
  Read(j, "eval_episodes", c.eval_episodes);
  if (j.contains("stop_score")) {
    c.stop_score = j.at("stop_score").is_null() ? std::numeric_limits<double>::infinity()
                                                : j.at("stop_score").get<double>();
  }
  Read(j, "seed", c.seed);
  return c;
}

json DqfdConfigToJson(const DqfdConfig& c) {
  return {{"network", SpecToJson(c.network)},
          {"pretraining_steps", c.pretraining_steps},
          {"margin", c.margin},
          {"lambda_nstep", c.lambda_nstep},
          {"lambda_margin", c.lambda_margin},
          {"lambda_l2", c.lambda_l2},
          {"n_step", c.n_step},
          {"gamma", c.gamma},
          {"target_update_period", c.target_update_period},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"priority_alpha", c.priority.alpha},
          {"priority_eps_demo", c.priority.eps_demo},
          {"priority_eps_self", c.priority.eps_self},
          {"interaction_steps", c.interaction_steps},
          {"self_capacity", c.self_capacity},
          {"exploration_epsilon", c.exploration_epsilon},
          {"log_period", c.log_period},
          {"standardize_inputs", c.standardize_inputs},
          {"keep_best_snapshot", c.keep_best_snapshot},
          {"seed", c.seed}};
}

DqfdConfig DqfdConfigFromJson(const json& j, const DqfdConfig& defaults) {
  RejectUnknownKeys(j,
                    {"network", "pretraining_steps", "margin", "lambda_nstep",
                     "lambda_margin", "lambda_l2", "n_step", "gamma",
                     "target_update_period", "batch_size", "learning_rate",
                     "priority_alpha", "priority_eps_demo", "priority_eps_self",
                     "interaction_steps", "self_capacity", "exploration_epsilon",
                     "log_period", "standardize_inputs", "keep_best_snapshot", "seed"},
                    "dqfd");
  DqfdConfig c = defaults;
  if (j.contains("network")) c.network = SpecFromJson(j.at("network"), c.network);
  Read(j, "pretraining_steps", c.pretraining_steps);
  Read(j, "margin", c.margin);
  Read(j, "lambda_nstep", c.lambda_nstep);
  Read(j, "lambda_margin", c.lambda_margin);
  Read(j, "lambda_l2", c.lambda_l2);
  Read(j, "n_step", c.n_step);
  Read(j, "gamma", c.gamma);
  Read(j, "target_update_period", c.target_update_period);
  Read(j, "batch_size", c.batch_size);
  Read(j, "learning_rate", c.learning_rate);
  Read(j, "priority_alpha", c.priority.alpha);
  Read(j, "priority_eps_demo", c.priority.eps_demo);
  Read(j, "priority_eps_self", c.priority.eps_self);
  Read(j, "interaction_steps", c.interaction_steps);
  Read(j, "self_capacity", c.self_capacity);
  Read(j, "exploration_epsilon", c.exploration_epsilon);
  Read(j, "log_period", c.log_period);
  Read(j, "standardize_inputs", c.standardize_inputs);
  Read(j, "keep_best_snapshot", c.keep_best_snapshot);
  Read(j, "seed", c.seed);
  return c;
}

ExperimentConfig ExperimentConfig::Defaults() {
  ExperimentConfig c;
  auto victim = [](std::string id, std::vector<int> hidden, std::uint64_t seed) {
    VictimSpec v;
    v.id = std::move(id);
    v.dqn.network.layer_sizes = {kStateDim};
    for (int h : hidden) v.dqn.network.layer_sizes.push_back(h);
    v.dqn.network.layer_sizes.push_back(kCartPoleActions);
    v.dqn.network.seed = seed + 100;
    v.dqn.seed = seed;
    v.dqn.total_steps = 100000;
    v.dqn.eval_period = 5000;
    v.dqn.eval_episodes = 20;
    v.dqn.stop_score = 500.0;
    return v;
  };
  c.victims = {victim("dqn-a", {64, 64}, 3), victim("dqn-b", {32, 32}, 1),
               victim("dqn-c", {128}, 1)};

  c.adversary.dqn.total_steps = 30000;
  c.adversary.dqn.learning_starts = 1000;
  c.adversary.dqn.replay_capacity = 30000;
  c.adversary.dqn.eval_period = 2500;
  c.adversary.dqn.eval_episodes = 20;
  return c;
}

void ExperimentConfig::Validate() const {
  if (victims.empty()) throw std::invalid_argument("config: empty victim roster");
  std::set<std::string> ids;
  for (const auto& v : victims) {
    if (v.id.empty() || v.id.find_first_of(",/\\ \"") != std::string::npos) {
      throw std::invalid_argument("config: bad victim id '" + v.id + "'");
    }
    if (!ids.insert(v.id).second) throw std::invalid_argument("config: duplicate victim id");
    v.dqn.Validate();
    if (v.dqn.network.layer_sizes.front() != kStateDim ||
        v.dqn.network.layer_sizes.back() != kCartPoleActions) {
      throw std::invalid_argument("config: victim network must map 4 -> 2");
    }
  }
  if (demo_counts.empty()) throw std::invalid_argument("config: no demo counts");
  for (size_t n : demo_counts) {
    if (n < 2) throw std::invalid_argument("config: demo counts must be >= 2");
  }
  if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0)) {
    throw std::invalid_argument("config: heldout_fraction outside (0, 1)");
  }
  dqfd.Validate();
  adversary.Validate();
  fgsm.Validate();
  if (!crop_victim.empty()) victim(crop_victim);
  if (crop.omegas.empty()) throw std::invalid_argument("config: empty crop sweep");
  for (double w : crop.omegas) {
    if (!(w >= 0.0)) throw std::invalid_argument("config: crop omega < 0");
  }
  if (crop.return_episodes < 1 || crop.demo_count < 2 || crop.agreement_states < 1 ||
      crop.transfer_episodes < 1) {
    throw std::invalid_argument("config: crop counts must be positive");
  }
  if (evaluation.victim_episodes < 1 || evaluation.attack_episodes < 1 ||
      evaluation.transfer_episodes < 1 || evaluation.agreement_states < 1) {
    throw std::invalid_argument("config: evaluation counts must be positive");
  }
}

const VictimSpec& ExperimentConfig::victim(const std::string& id) const {
  for (const auto& v : victims) {
    if (v.id == id) return v;
  }
  throw std::invalid_argument("config: no victim with id '" + id + "'");
}

json ToJson(const ExperimentConfig& c) {
  json victims = json::array();
  for (const auto& v : c.victims) {
    victims.push_back({{"id", v.id}, {"dqn", DqnConfigToJson(v.dqn)}});
  }
  return {
      {"master_seed", c.master_seed},
      {"output_dir", c.output_dir},
      {"victims", victims},
      {"demo_counts", c.demo_counts},
      {"heldout_fraction", c.heldout_fraction},
      {"dqfd", DqfdConfigToJson(c.dqfd)},
      {"adversary",
       {{"perturbation_cost", c.adversary.perturbation_cost},
        {"r_max", c.adversary.r_max},
        {"dqn", DqnConfigToJson(c.adversary.dqn)}}},
      {"fgsm",
       {{"eps", c.fgsm.eps},
        {"low", c.fgsm.low},
        {"high", c.fgsm.high},
        {"max_iterations", c.fgsm.max_iterations},
        {"refresh_gradient", c.fgsm.refresh_gradient}}},
      {"crop",
       {{"victim", c.crop_victim},
        {"omegas", c.crop.omegas},
        {"literal_inequality", c.crop.literal_inequality},
        {"return_episodes", c.crop.return_episodes},
        {"demo_count", c.crop.demo_count},
        {"agreement_states", c.crop.agreement_states},
        {"transfer_episodes", c.crop.transfer_episodes}}},
      {"evaluation",
       {{"victim_episodes", c.evaluation.victim_episodes},
        {"attack_episodes", c.evaluation.attack_episodes},
        {"transfer_episodes", c.evaluation.transfer_episodes},
        {"agreement_states", c.evaluation.agreement_states}}},
  };
}

ExperimentConfig FromJson(const json& j, const ExperimentConfig& defaults) {
  RejectUnknownKeys(j,
                    {"master_seed", "output_dir", "victims", "demo_counts",
                     "heldout_fraction", "dqfd", "adversary", "fgsm", "crop",
                     "evaluation"},
                    "config");
  ExperimentConfig c = defaults;
  Read(j, "master_seed", c.master_seed);
  Read(j, "output_dir", c.output_dir);
  if (j.contains("victims")) {
    c.victims.clear();
    for (const auto& v : j.at("victims")) {
      RejectUnknownKeys(v, {"id", "dqn"}, "victims[]");
      VictimSpec spec;
      spec.id = v.at("id").get<std::string>();
      // Unspecified victim fields fall back to the first default victim.
      const DqnConfig base = defaults.victims.empty() ? DqnConfig{} : defaults.victims[0].dqn;
      spec.dqn = v.contains("dqn") ? DqnConfigFromJson(v.at("dqn"), base) : base;
      c.victims.push_back(std::move(spec));
    }
  }
  Read(j, "demo_counts", c.demo_counts);
  Read(j, "heldout_fraction", c.heldout_fraction);
  if (j.contains("dqfd")) c.dqfd = DqfdConfigFromJson(j.at("dqfd"), c.dqfd);
  if (j.contains("adversary")) {
    const json& a = j.at("adversary");
    RejectUnknownKeys(a, {"perturbation_cost", "r_max", "dqn"}, "adversary");
    Read(a, "perturbation_cost", c.adversary.perturbation_cost);
    Read(a, "r_max", c.adversary.r_max);
    if (a.contains("dqn")) c.adversary.dqn = DqnConfigFromJson(a.at("dqn"), c.adversary.dqn);
  }
  if (j.contains("fgsm")) {
    const json& f = j.at("fgsm");
    RejectUnknownKeys(f, {"eps", "low", "high", "max_iterations", "refresh_gradient"},
                      "fgsm");
    Read(f, "eps", c.fgsm.eps);
    Read(f, "low", c.fgsm.low);
    Read(f, "high", c.fgsm.high);
    Read(f, "max_iterations", c.fgsm.max_iterations);
    Read(f, "refresh_gradient", c.fgsm.refresh_gradient);
  }
  if (j.contains("crop")) {
    const json& k = j.at("crop");
    RejectUnknownKeys(k,
                      {"victim", "omegas", "literal_inequality", "return_episodes",
                       "demo_count", "agreement_states", "transfer_episodes"},
                      "crop");
    Read(k, "victim", c.crop_victim);
    Read(k, "omegas", c.crop.omegas);
    Read(k, "literal_inequality", c.crop.literal_inequality);
    Read(k, "return_episodes", c.crop.return_episodes);
    Read(k, "demo_count", c.crop.demo_count);
    Read(k, "agreement_states", c.crop.agreement_states);
    Read(k, "transfer_episodes", c.crop.transfer_episodes);
  }
  if (j.contains("evaluation")) {
    const json& e = j.at("evaluation");
    RejectUnknownKeys(e,
                      {"victim_episodes", "attack_episodes", "transfer_episodes",
                       "agreement_states"},
                      "evaluation");
    Read(e, "victim_episodes", c.evaluation.victim_episodes);
    Read(e, "attack_episodes", c.evaluation.attack_episodes);
    Read(e, "transfer_episodes", c.evaluation.transfer_episodes);
    Read(e, "agreement_states", c.evaluation.agreement_states);
  }
  c.Validate();
  return c;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: " + path.string() + ": " + e.what());
  }
  return FromJson(j);
}

void SaveConfig(const std::filesystem::path& path, const ExperimentConfig& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write config " + path.string());
  out << ToJson(config).dump(2) << '\n';
}

ExperimentConfig ApplyOverrides(const ExperimentConfig& config,
                                const std::vector<std::string>& assignments) {
  json j = ToJson(config);
  for (const std::string& assignment : assignments) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("override must look like key.path=value: " + assignment);
    }
    std::string pointer = "/" + assignment.substr(0, eq);
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    const json::json_pointer ptr(pointer);
    if (!j.contains(ptr)) {
      throw std::invalid_argument("override: unknown key " + assignment.substr(0, eq));
    }
    j[ptr] = value;
  }
  return FromJson(j, config);
}

std::string ConfigHash(const ExperimentConfig& config) {
  return HexDigest(Fnv1a64(ToJson(config).dump()));
}

}  // namespace mlab
