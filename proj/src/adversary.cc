#include "mlab/adversary.h"

#include <stdexcept>

#include "mlab/seeds.h"

namespace mlab {

void AdversaryConfig::Validate() const {
  if (!(perturbation_cost >= 0.0)) {
    throw std::invalid_argument("AdversaryConfig: perturbation cost < 0");
  }
  if (!(r_max > 0.0)) throw std::invalid_argument("AdversaryConfig: r_max <= 0");
  dqn.Validate();
  if (dqn.network.layer_sizes.front() != kStateDim ||
      dqn.network.layer_sizes.back() != 2) {
    throw std::invalid_argument("AdversaryConfig: network must map 4 inputs to 2 actions");
  }
}

int WorstAction(const Network& q, const Observation& s) {
  return ArgMin(q.Forward(s));
}

double AdversaryStepReward(bool perturb, bool terminal, double cost, double r_max,
                           double score) {
  double reward = perturb ? -cost : 0.0;
  if (terminal) reward += r_max - score;
  return reward;
}

AdversaryStep AdversaryEnvStep(const AdversaryEnvState& state, int adversary_action,
                               Policy& victim, const Network& q_tilde,
                               const AdversaryConfig& config) {
  if (adversary_action != kNoPerturb && adversary_action != kPerturb) {
    throw std::out_of_range("AdversaryEnvStep: invalid adversary action");
  }
  const bool perturb = adversary_action == kPerturb;
  const Observation obs = state.victim.observation();
  const int action = perturb ? WorstAction(q_tilde, obs) : victim.Act(obs);
  const StepResult r = StepCartPole(state.victim, action);

  AdversaryStep out;
  out.victim_action = action;
  out.next.victim = r.next_state;
  out.next.score = state.score + r.reward;
  out.next.perturbations = state.perturbations + (perturb ? 1 : 0);
  out.terminal = r.terminal;
  out.truncated = r.truncated;
  out.reward = AdversaryStepReward(perturb, r.terminal, config.perturbation_cost,
                                   config.r_max, out.next.score);
  return out;
}

AdversaryEnv::AdversaryEnv(Policy victim, std::shared_ptr<const Network> q_tilde,
                           AdversaryConfig config)
    : victim_(std::move(victim)), q_tilde_(std::move(q_tilde)), config_(std::move(config)) {
  if (!q_tilde_) throw std::invalid_argument("AdversaryEnv: null Q~");
}

Observation AdversaryEnv::Reset(std::uint64_t seed) {
  state_ = AdversaryEnvState{ResetCartPole(seed), 0.0, 0};
  return state_.victim.observation();
}

EnvStep AdversaryEnv::Step(int action) {
  const AdversaryStep step = AdversaryEnvStep(state_, action, victim_, *q_tilde_, config_);
  state_ = step.next;
  return {state_.victim.observation(), step.reward, step.terminal, step.truncated};
}

DqnResult TrainAdversary(const Policy& victim, std::shared_ptr<const Network> q_tilde,
                         const AdversaryConfig& config) {
  config.Validate();
  if (!q_tilde) throw std::invalid_argument("TrainAdversary: null Q~");
  return TrainDqn(config.dqn, [&] {
    return std::make_unique<AdversaryEnv>(victim, q_tilde, config);
  });
}

AttackReport EvaluateAttack(const Network& adversary, const Policy& victim,
                            std::shared_ptr<const Network> q_tilde,
                            const AdversaryConfig& config, int episodes,
                            std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("EvaluateAttack: episodes < 1");
  AdversaryEnv env(victim, std::move(q_tilde), config);
  AttackReport report;
  double regret_sum = 0.0;
  double perturbation_sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Observation obs = env.Reset(DeriveSeed(seed, static_cast<std::uint64_t>(e)));
    AttackEpisode ep;
    while (true) {
      const EnvStep step = env.Step(GreedyAction(adversary, obs));
      ep.adversary_return += step.reward;
      if (step.terminal) break;
      obs = step.observation;
    }
    ep.victim_return = env.state().score;
    ep.perturbations = env.state().perturbations;
    ep.regret = config.r_max - ep.victim_return;
    regret_sum += ep.regret;
    perturbation_sum += ep.perturbations;
    report.episodes.push_back(ep);
  }
  report.mean_regret = regret_sum / episodes;
  report.mean_perturbations = perturbation_sum / episodes;
  return report;
}

}  // namespace mlab
