#pragma once

// Double-Q DQN over a generic episodic task. Used for the victim policies
// (on CartPole) and for the adversary (on the perturbation task).

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "mlab/approximator.h"
#include "mlab/cartpole.h"
#include "mlab/policy.h"

namespace mlab {

struct Transition {
  Observation s{};
  int a = 0;
  double r = 0.0;
  Observation next_s{};
  // No bootstrap past this transition.
  bool terminal = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct EnvStep {
  Observation observation{};
  double reward = 0.0;
  bool terminal = false;
  bool truncated = false;  // ended by the step cap, not by failure
};

class EpisodicEnv {
 public:
  virtual ~EpisodicEnv() = default;
  virtual Observation Reset(std::uint64_t seed) = 0;
  virtual EnvStep Step(int action) = 0;
  virtual int num_actions() const = 0;
};

using EnvFactory = std::function<std::unique_ptr<EpisodicEnv>()>;

class CartPoleEnv : public EpisodicEnv {
 public:
  Observation Reset(std::uint64_t seed) override;
  EnvStep Step(int action) override;
  int num_actions() const override { return kCartPoleActions; }

  const EnvState& state() const { return state_; }

 private:
  EnvState state_;
};

// Fixed-capacity FIFO; once full, each Add overwrites the oldest element.
template <typename T>
class RingBuffer {
 public:
  explicit RingBuffer(size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("RingBuffer: zero capacity");
    items_.reserve(capacity);
  }

  void Add(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
    }
    head_ = (head_ + 1) % capacity_;
    ++total_added_;
  }

  size_t size() const { return items_.size(); }
  size_t capacity() const { return capacity_; }
  std::uint64_t total_added() const { return total_added_; }

  // Index 0 is the oldest retained element.
  const T& operator[](size_t i) const {
    return items_.size() < capacity_ ? items_[i] : items_[(head_ + i) % capacity_];
  }

 private:
  size_t capacity_;
  size_t head_ = 0;
  std::uint64_t total_added_ = 0;
  std::vector<T> items_;
};

struct DqnConfig {
  NetworkSpec network{{kStateDim, 64, 64, kCartPoleActions}, Activation::kReLU, 1};
  int replay_capacity = 50000;
  int batch_size = 64;
  double gamma = 0.99;
  int target_update_period = 500;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  // 0 means 10% of total_steps.
  std::int64_t epsilon_decay_steps = 0;
  std::int64_t total_steps = 100000;
  double learning_rate = 1e-3;
  std::int64_t learning_starts = 1000;
  int train_period = 1;
  // Huber threshold on the TD error; 0 selects plain squared error.
  double huber_delta = 1.0;
  // Greedy evaluation every eval_period steps; the best-scoring snapshot is
  // returned. 0 returns the final network instead.
  std::int64_t eval_period = 0;
  int eval_episodes = 10;
  // Stop early once a greedy evaluation reaches this mean score.
  double stop_score = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;

  void Validate() const;
  std::int64_t decay_steps() const;
};

struct EpisodeRecord {
  std::int64_t episode = 0;
  std::int64_t steps = 0;  // environment steps taken in the episode
  double episode_return = 0.0;
};

struct DqnResult {
  Network network;
  std::vector<EpisodeRecord> curve;
  std::int64_t steps_taken = 0;
  std::optional<double> best_eval;
  std::int64_t best_eval_step = 0;
};

// Called after every environment step (post update, post target sync).
using DqnStepHook = std::function<void(std::int64_t step, const Network& behavior,
                                       const Network& target)>;

int GreedyAction(const Network& net, const Observation& s);
int EpsilonGreedyAction(const Network& net, const Observation& s, double epsilon,
                        std::mt19937_64& rng);

// r if terminal, else r + gamma * Q_target(s', argmax_a Q_behavior(s', a)).
double DoubleQTarget(const Network& behavior, const Network& target,
                     const Transition& t, double gamma);

double EpsilonAt(const DqnConfig& config, std::int64_t step);

// Behavior/target pair plus optimizer; one call to Update is one gradient
// step on a mini-batch of double-Q TD errors.
class DqnLearner {
 public:
  explicit DqnLearner(const DqnConfig& config);

  // Returns the mean TD loss of the batch before the update.
  double Update(std::span<const Transition* const> batch);
  double Loss(std::span<const Transition* const> batch) const;
  void SyncTarget() { target_ = behavior_; }

  const Network& behavior() const { return behavior_; }
  const Network& target() const { return target_; }

 private:
  double LossAndOutputGrads(std::span<const Transition* const> batch,
                            Eigen::MatrixXd* states, Eigen::MatrixXd* grads) const;

  DqnConfig config_;
  Network behavior_;
  Network target_;
  AdamOptimizer optimizer_;
};

DqnResult TrainDqn(const DqnConfig& config, const EnvFactory& make_env,
                   const DqnStepHook& hook = {});

// Victim training on CartPole.
DqnResult TrainVictim(const DqnConfig& config);

struct EvalStats {
  std::vector<double> returns;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;

  static EvalStats FromReturns(std::vector<double> returns);
};

// Runs `episodes` CartPole episodes; episode i starts from
// ResetCartPole(DeriveSeed(seed, i)). The policy is taken by value so its
// random stream (if any) is the same on every call.
EvalStats EvaluatePolicy(Policy policy, int episodes, std::uint64_t seed);

}  // namespace mlab
