#pragma once

// Iterative FGSM against the imitated Q-function and transfer of the crafted
// observations to the victim.

#include <cstdint>
#include <optional>
#include <vector>

#include "mlab/approximator.h"
#include "mlab/cartpole.h"
#include "mlab/policy.h"

namespace mlab {

struct FgsmConfig {
  double eps = 0.01;
  double low = -5.0;
  double high = 5.0;
  int max_iterations = 1000;
  // Recompute the input gradient at every iterate; when false the gradient
  // at the original state is reused for all iterations.
  bool refresh_gradient = true;

  void Validate() const;
};

struct CraftOutcome {
  std::optional<Observation> perturbed;
  int iterations = 0;
};

// Descends Q~(x, a0), a0 = greedy action at s, by sign steps of size eps,
// clipping to [low, high]. Succeeds as soon as the greedy action of Q~
// differs from a0; fails after max_iterations or when a step no longer
// moves x.
CraftOutcome CraftAdversarialState(const Network& q_tilde, const Observation& s,
                                   const FgsmConfig& config);

struct TransferTrial {
  Observation original{};
  std::optional<Observation> perturbed;
  bool imitation_flipped = false;
  bool victim_flipped = false;
};

// The imitated policy is Greedy(q_tilde). The victim's action on the
// perturbed state is compared with its action on the original state.
TransferTrial RunTransferTrial(Policy& victim, const Network& q_tilde,
                               const Observation& s, const FgsmConfig& config);

struct TransferEpisode {
  int steps = 0;
  int crafted = 0;
  int transferred = 0;
};

struct TransferReport {
  std::vector<TransferEpisode> episodes;
  double mean_crafted = 0.0;
  double mean_transferred = 0.0;
};

// Victim-driven episodes (episode i from ResetCartPole(DeriveSeed(seed, i)));
// every visited state is attacked on the side without altering the
// trajectory.
TransferReport RunTransferEval(const Policy& victim, const Network& q_tilde, int episodes,
                               const FgsmConfig& config, std::uint64_t seed);

}  // namespace mlab
