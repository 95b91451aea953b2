#include "mlab/transfer.h"

#include <algorithm>
#include <stdexcept>

#include "mlab/seeds.h"

namespace mlab {

void FgsmConfig::Validate() const {
  if (!(eps > 0.0)) throw std::invalid_argument("FgsmConfig: eps must be > 0");
  if (!(low < high)) throw std::invalid_argument("FgsmConfig: low must be < high");
  if (max_iterations < 1) throw std::invalid_argument("FgsmConfig: max_iterations < 1");
}

namespace {

double Sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

CraftOutcome CraftAdversarialState(const Network& q_tilde, const Observation& s,
                                   const FgsmConfig& config) {
  config.Validate();
  Eigen::VectorXd values;
  Eigen::VectorXd grad;
  const int original = ArgMax(q_tilde.Forward(s));
  grad = q_tilde.InputGradient(s, Objective::kNegativeActionValue, original);
  Observation x = s;
  Observation prev = s;
  CraftOutcome out;
  for (int it = 1; it <= config.max_iterations; ++it) {
    Observation next = x;
    for (int i = 0; i < kStateDim; ++i) {
      next[i] = std::clamp(x[i] + config.eps * Sign(grad(i)), config.low, config.high);
    }
    out.iterations = it;
    if (next == x) return out;
    // The step map is deterministic, so revisiting a point means a cycle.
    if (it > 1 && next == prev) return out;
    prev = x;
    x = next;
    if (config.refresh_gradient) {
      grad = q_tilde.InputGradient(x, Objective::kNegativeActionValue, original, &values);
    } else {
      values = q_tilde.Forward(x);
    }
    if (ArgMax(values) != original) {
      out.perturbed = x;
      return out;
    }
  }
  return out;
}

TransferTrial RunTransferTrial(Policy& victim, const Network& q_tilde,
                               const Observation& s, const FgsmConfig& config) {
  TransferTrial trial;
  trial.original = s;
  trial.perturbed = CraftAdversarialState(q_tilde, s, config).perturbed;
  if (trial.perturbed) {
    trial.imitation_flipped = true;
    const int before = victim.Act(s);
    trial.victim_flipped = victim.Act(*trial.perturbed) != before;
  }
  return trial;
}

TransferReport RunTransferEval(const Policy& victim, const Network& q_tilde, int episodes,
                               const FgsmConfig& config, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("RunTransferEval: episodes < 1");
  config.Validate();
  Policy actor = victim;
  // Probing uses its own copy so randomized victims keep the same trajectory.
  Policy probe = victim;
  TransferReport report;
  double crafted_sum = 0.0;
  double transferred_sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    EnvState s = ResetCartPole(DeriveSeed(seed, static_cast<std::uint64_t>(e)));
    TransferEpisode ep;
    while (!s.done) {
      const Observation obs = s.observation();
      const int action = actor.Act(obs);
      if (const auto crafted = CraftAdversarialState(q_tilde, obs, config).perturbed) {
        ++ep.crafted;
        if (probe.Act(*crafted) != action) ++ep.transferred;
      }
      s = StepCartPole(s, action).next_state;
      ++ep.steps;
    }
    crafted_sum += ep.crafted;
    transferred_sum += ep.transferred;
    report.episodes.push_back(ep);
  }
  report.mean_crafted = crafted_sum / episodes;
  report.mean_transferred = transferred_sum / episodes;
  return report;
}

}  // namespace mlab
