#pragma once

// Constrained randomization of a value-based policy: at each state the
// policy picks uniformly among actions whose value is within omega_max of
// the greedy action. This bounds the per-step value loss by omega_max; it
// does not bound the regret of a whole episode.

#include <cstdint>
#include <memory>
#include <vector>

#include "mlab/approximator.h"
#include "mlab/dqfd.h"
#include "mlab/policy.h"
#include "mlab/transfer.h"

namespace mlab {

// Greedy action (lowest index on ties) first, then every other action a with
// Q(a*) - Q(a) <= omega (or >= omega with `literal`), in index order.
std::vector<int> FeasibleActions(const Eigen::VectorXd& q_values, double omega_max,
                                 bool literal = false);
std::vector<int> FeasibleActions(const Network& q, const Observation& s,
                                 double omega_max, bool literal = false);

Policy MakeCropPolicy(std::shared_ptr<const Network> q, const CropConfig& config);

struct CropEvalConfig {
  std::vector<double> omegas{0.0, 0.25, 0.5, 1.0, 2.0, 1e9};
  bool literal_inequality = false;
  int return_episodes = 100;
  size_t demo_count = 5000;
  int agreement_states = 1000;
  int transfer_episodes = 20;
  DqfdConfig dqfd;
  FgsmConfig fgsm;
};

struct CropRow {
  double omega = 0.0;
  double mean_return = 0.0;
  // Agreement of the imitation (trained on CRoP demonstrations) with the
  // deterministic victim on victim-driven states.
  double imitation_agreement = 0.0;
  double mean_transfers = 0.0;
};

// All seeds are independent of omega, so the omega = 0 row coincides with
// the undefended victim whenever Q has no exact ties.
std::vector<CropRow> EvaluateCrop(std::shared_ptr<const Network> victim_q,
                                  const CropEvalConfig& config, std::uint64_t seed);

// One row of EvaluateCrop for an arbitrary defended policy.
CropRow EvaluateDefense(const Policy& defended, std::shared_ptr<const Network> victim_q,
                        const CropEvalConfig& config, std::uint64_t seed);

}  // namespace mlab
