#pragma once

// Deep Q-learning from demonstrations: prioritized pre-training on observed
// victim transitions with a hybrid loss, followed by epsilon-greedy
// interaction in a replica of the victim's environment.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mlab/approximator.h"
#include "mlab/demonstrations.h"
#include "mlab/policy.h"
#include "mlab/replay_buffer.h"

namespace mlab {

struct DqfdConfig {
  NetworkSpec network{{kStateDim, 64, 64, kCartPoleActions}, Activation::kReLU, 1};
  std::int64_t pretraining_steps = 5000;
  double margin = 0.8;
  double lambda_nstep = 1.0;   // weight of the n-step loss
  double lambda_margin = 1.0;  // weight of the large-margin loss
  double lambda_l2 = 1e-5;     // weight of the L2 penalty
  int n_step = 10;
  double gamma = 0.99;
  int target_update_period = 1000;
  int batch_size = 32;
  double learning_rate = 1e-3;
  PriorityConfig priority;
  std::int64_t interaction_steps = 100000;
  size_t self_capacity = 50000;
  double exploration_epsilon = 0.01;
  int log_period = 100;
  // Rescale the initial first layer so that it sees standardized demo states.
  bool standardize_inputs = true;
  // Return the logged snapshot with the best agreement on the training
  // demonstrations instead of the final network.
  bool keep_best_snapshot = true;
  std::uint64_t seed = 0;

  void Validate() const;
};

// J_E = max_a [Q(s,a) + l(a_E,a)] - Q(s,a_E), l = margin off the expert action.
double MarginLoss(std::span<const double> q_row, int expert_action, double margin);
double MarginLoss(const Eigen::VectorXd& q_row, int expert_action, double margin);

// Discounted sum of up to n rewards starting at segment[0], stopping after a
// terminal transition. Without a terminal, bootstraps with
// gamma^m * max_a Q_target(s_m, a) from the last next-state reached.
double NStepReturn(std::span<const Transition> segment, int n, double gamma,
                   const Network& target);

// Same quantity from a replay entry's lookahead cache.
double NStepTarget(const NStepCache& cache, const Network& target);

struct HybridLossResult {
  double loss = 0.0;
  double j_dq = 0.0;
  double j_n = 0.0;
  double j_e = 0.0;
  double j_l2 = 0.0;
  Gradients grads;
  // |1-step TD error| per batch entry.
  std::vector<double> td_errors;
};

// J = J_DQ + l1 J_n + l2 J_E + l3 J_L2 over the batch. J_DQ and J_n are mean
// squared errors against the double-Q 1-step and n-step targets; J_E is
// averaged over the whole batch but only demonstration entries contribute.
HybridLossResult HybridLoss(const Network& behavior, const Network& target,
                            std::span<const ReplayEntry* const> batch,
                            const DqfdConfig& config);

struct ImitationLogRow {
  std::int64_t step = 0;  // cumulative gradient updates
  double loss = 0.0;      // mean loss over the logging window
  double agreement = 0.0; // greedy agreement with the training demonstrations
};

struct DqfdResult {
  Network q;
  std::vector<ImitationLogRow> log;
  std::int64_t env_steps = 0;
  std::int64_t env_steps_during_pretraining = 0;
  std::int64_t best_step = 0;  // update count at which q was taken
};

struct DqfdHooks {
  // Called after each update with the phase (1 or 2) and the buffer.
  std::function<void(int phase, std::int64_t step, const ReplayBuffer&)> after_update;
};

// Folds per-component mean and standard deviation of `states` (one state per
// column) into the first layer: the layer then computes W (x - mean) / sd + b.
void StandardizeInputs(Network& net, const Eigen::MatrixXd& states);

DqfdResult TrainDqfd(const DemonstrationSet& demos, const DqfdConfig& config,
                     const DqfdHooks& hooks = {});

// Fraction of transitions whose recorded action is the greedy action of q.
double DemoAgreement(const Network& q, const DemonstrationSet& demos);

// Victim-driven rollouts; fraction of the first `num_states` visited states
// on which `candidate` picks the same action as `reference`.
double RolloutAgreement(Policy candidate, Policy reference, int num_states,
                        std::uint64_t seed);

Policy ImitatedPolicy(std::shared_ptr<const Network> q);

}  // namespace mlab
