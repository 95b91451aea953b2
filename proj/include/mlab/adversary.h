#pragma once

// Per-step perturbation adversary. At every victim step the adversary either
// leaves the observation alone or perturbs it; a perturbation is assumed to
// succeed and makes the victim execute argmin_a Q~(s, a) of the imitated
// Q-function. The adversary pays c per perturbation and collects the victim's
// regret R_max - R_t when the victim's episode ends.
//
// Only the victim's decisions are visible here: the victim enters as an
// opaque Policy, never as a network.

#include <cstdint>
#include <memory>
#include <vector>

#include "mlab/approximator.h"
#include "mlab/cartpole.h"
#include "mlab/dqn.h"
#include "mlab/policy.h"

namespace mlab {

enum AdversaryAction : int {
  kNoPerturb = 0,
  kPerturb = 1,
};

struct AdversaryConfig {
  double perturbation_cost = 1.0;
  double r_max = 500.0;
  DqnConfig dqn;

  void Validate() const;
};

struct AdversaryEnvState {
  EnvState victim;
  double score = 0.0;  // victim return so far, R_t
  int perturbations = 0;
};

struct AdversaryStep {
  AdversaryEnvState next;
  double reward = 0.0;
  bool terminal = false;
  bool truncated = false;
  int victim_action = 0;
};

// argmin_a Q(s, a), ties to the lowest index.
int WorstAction(const Network& q, const Observation& s);

// 0 or -cost for the step, plus (r_max - score) if the step ended the
// victim's episode; `score` already includes this step's reward.
double AdversaryStepReward(bool perturb, bool terminal, double cost, double r_max,
                           double score);

AdversaryStep AdversaryEnvStep(const AdversaryEnvState& state, int adversary_action,
                               Policy& victim, const Network& q_tilde,
                               const AdversaryConfig& config);

class AdversaryEnv : public EpisodicEnv {
 public:
  AdversaryEnv(Policy victim, std::shared_ptr<const Network> q_tilde,
               AdversaryConfig config);

  Observation Reset(std::uint64_t seed) override;
  EnvStep Step(int action) override;
  int num_actions() const override { return 2; }

  const AdversaryEnvState& state() const { return state_; }

 private:
  Policy victim_;
  std::shared_ptr<const Network> q_tilde_;
  AdversaryConfig config_;
  AdversaryEnvState state_;
};

DqnResult TrainAdversary(const Policy& victim, std::shared_ptr<const Network> q_tilde,
                         const AdversaryConfig& config);

struct AttackEpisode {
  double regret = 0.0;
  int perturbations = 0;
  double victim_return = 0.0;
  double adversary_return = 0.0;
};

struct AttackReport {
  std::vector<AttackEpisode> episodes;
  double mean_regret = 0.0;
  double mean_perturbations = 0.0;
};

// Greedy adversary over `episodes` episodes; episode i starts from
// ResetCartPole(DeriveSeed(seed, i)).
AttackReport EvaluateAttack(const Network& adversary, const Policy& victim,
                            std::shared_ptr<const Network> q_tilde,
                            const AdversaryConfig& config, int episodes,
                            std::uint64_t seed);

}  // namespace mlab
