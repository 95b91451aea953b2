#include "mlab/dqn.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mlab/seeds.h"

namespace mlab {

Observation CartPoleEnv::Reset(std::uint64_t seed) {
  state_ = ResetCartPole(seed);
  return state_.observation();
}

EnvStep CartPoleEnv::Step(int action) {
  const StepResult r = StepCartPole(state_, action);
  state_ = r.next_state;
  return {state_.observation(), r.reward, r.terminal, r.truncated};
}

void DqnConfig::Validate() const {
  network.Validate();
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("DqnConfig: gamma must lie in (0, 1]");
  }
  if (replay_capacity < 1 || batch_size < 1 || target_update_period < 1 ||
      train_period < 1) {
    throw std::invalid_argument("DqnConfig: capacities and periods must be positive");
  }
  if (total_steps < 0 || learning_starts < 0 || epsilon_decay_steps < 0 ||
      eval_period < 0 || eval_episodes < 1) {
    throw std::invalid_argument("DqnConfig: negative step count");
  }
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 &&
        epsilon_end <= 1.0)) {
    throw std::invalid_argument("DqnConfig: epsilon outside [0, 1]");
  }
  if (!(learning_rate > 0.0) || huber_delta < 0.0) {
    throw std::invalid_argument("DqnConfig: bad learning rate or huber delta");
  }
}

std::int64_t DqnConfig::decay_steps() const {
  if (epsilon_decay_steps > 0) return epsilon_decay_steps;
  return std::max<std::int64_t>(1, total_steps / 10);
}

int GreedyAction(const Network& net, const Observation& s) {
  return ArgMax(net.Forward(s));
}

int EpsilonGreedyAction(const Network& net, const Observation& s, double epsilon,
                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, net.num_actions() - 1);
    return pick(rng);
  }
  return GreedyAction(net, s);
}

double DoubleQTarget(const Network& behavior, const Network& target,
                     const Transition& t, double gamma) {
  if (t.terminal) return t.r;
  const int best = ArgMax(behavior.Forward(t.next_s));
  return t.r + gamma * target.Forward(t.next_s)(best);
}

double EpsilonAt(const DqnConfig& config, std::int64_t step) {
  const double frac =
      std::min(1.0, static_cast<double>(step) / static_cast<double>(config.decay_steps()));
  return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start);
}

DqnLearner::DqnLearner(const DqnConfig& config)
    : config_(config),
      behavior_(config.network),
      target_(behavior_),
      optimizer_(behavior_, AdamConfig{.step_size = config.learning_rate}) {
  config_.Validate();
}

double DqnLearner::LossAndOutputGrads(std::span<const Transition* const> batch,
                                      Eigen::MatrixXd* states,
                                      Eigen::MatrixXd* grads) const {
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) throw std::invalid_argument("DqnLearner: empty batch");
  Eigen::MatrixXd s(kStateDim, n), next(kStateDim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.col(i) = Eigen::Map<const Eigen::VectorXd>(batch[i]->s.data(), kStateDim);
    next.col(i) = Eigen::Map<const Eigen::VectorXd>(batch[i]->next_s.data(), kStateDim);
  }
  const Eigen::MatrixXd q = behavior_.ForwardBatch(s);
  const Eigen::MatrixXd q_next_behavior = behavior_.ForwardBatch(next);
  const Eigen::MatrixXd q_next_target = target_.ForwardBatch(next);

  double loss = 0.0;
  if (grads) *grads = Eigen::MatrixXd::Zero(q.rows(), n);
  const double delta = config_.huber_delta;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = *batch[i];
    double y = t.r;
    if (!t.terminal) {
      y += config_.gamma * q_next_target(ArgMax(q_next_behavior.col(i)), i);
    }
    const double err = q(t.a, i) - y;
    if (delta > 0.0 && std::abs(err) > delta) {
      loss += delta * (std::abs(err) - 0.5 * delta);
      if (grads) (*grads)(t.a, i) = err > 0 ? delta : -delta;
    } else if (delta > 0.0) {
      loss += 0.5 * err * err;
      if (grads) (*grads)(t.a, i) = err;
    } else {
      loss += err * err;
      if (grads) (*grads)(t.a, i) = 2.0 * err;
    }
  }
  if (states) *states = std::move(s);
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) throw DivergenceError("DQN: non-finite TD loss");
  return loss;
}

double DqnLearner::Loss(std::span<const Transition* const> batch) const {
  return LossAndOutputGrads(batch, nullptr, nullptr);
}

double DqnLearner::Update(std::span<const Transition* const> batch) {
  Eigen::MatrixXd states, grads;
  const double loss = LossAndOutputGrads(batch, &states, &grads);
  optimizer_.Step(behavior_, behavior_.Backward(states, grads));
  return loss;
}

namespace {

double GreedyScore(const Network& net, const EnvFactory& make_env, int episodes,
                   std::uint64_t seed) {
  auto env = make_env();
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Observation obs = env->Reset(DeriveSeed(seed, static_cast<std::uint64_t>(e)));
    while (true) {
      const EnvStep step = env->Step(GreedyAction(net, obs));
      total += step.reward;
      if (step.terminal) break;
      obs = step.observation;
    }
  }
  return total / episodes;
}

}  // namespace

DqnResult TrainDqn(const DqnConfig& config, const EnvFactory& make_env,
                   const DqnStepHook& hook) {
  config.Validate();
  std::mt19937_64 rng(DeriveSeed(config.seed, "dqn", "explore"));
  const std::uint64_t episode_seed = DeriveSeed(config.seed, "dqn", "episodes");
  const std::uint64_t eval_seed = DeriveSeed(config.seed, "dqn", "eval");

  DqnLearner learner(config);
  RingBuffer<Transition> replay(static_cast<size_t>(config.replay_capacity));
  auto env = make_env();

  DqnResult result{learner.behavior(), {}, 0, std::nullopt, 0};
  std::int64_t episode = 0;
  std::int64_t episode_steps = 0;
  double episode_return = 0.0;
  Observation obs = env->Reset(DeriveSeed(episode_seed, 0));

  std::vector<const Transition*> batch(static_cast<size_t>(config.batch_size));
  std::uniform_int_distribution<size_t> index_dist;

  for (std::int64_t t = 1; t <= config.total_steps; ++t) {
    const int a = EpsilonGreedyAction(learner.behavior(), obs,
                                      EpsilonAt(config, t - 1), rng);
    const EnvStep step = env->Step(a);
    // Time-limit endings keep bootstrapping; the state carries no clock.
    replay.Add({obs, a, step.reward, step.observation,
                step.terminal && !step.truncated});
    episode_return += step.reward;
    ++episode_steps;
    if (step.terminal) {
      result.curve.push_back({episode, episode_steps, episode_return});
      ++episode;
      episode_steps = 0;
      episode_return = 0.0;
      obs = env->Reset(DeriveSeed(episode_seed, static_cast<std::uint64_t>(episode)));
    } else {
      obs = step.observation;
    }

    if (t >= config.learning_starts && t % config.train_period == 0 &&
        replay.size() >= static_cast<size_t>(config.batch_size)) {
      index_dist.param(decltype(index_dist)::param_type(0, replay.size() - 1));
      for (auto& slot : batch) slot = &replay[index_dist(rng)];
      learner.Update(batch);
    }
    if (t % config.target_update_period == 0) learner.SyncTarget();
    if (hook) hook(t, learner.behavior(), learner.target());
    result.steps_taken = t;

    if (config.eval_period > 0 && t % config.eval_period == 0) {
      const double score = GreedyScore(learner.behavior(), make_env,
                                       config.eval_episodes, eval_seed);
      if (!result.best_eval || score > *result.best_eval) {
        result.best_eval = score;
        result.best_eval_step = t;
        result.network = learner.behavior();
      }
      if (score >= config.stop_score) break;
    }
  }
  if (config.eval_period == 0 || !result.best_eval) {
    result.network = learner.behavior();
  }
  return result;
}

DqnResult TrainVictim(const DqnConfig& config) {
  return TrainDqn(config, [] { return std::make_unique<CartPoleEnv>(); });
}

EvalStats EvalStats::FromReturns(std::vector<double> returns) {
  EvalStats stats;
  stats.returns = std::move(returns);
  if (stats.returns.empty()) return stats;
  double sum = 0.0;
  for (double r : stats.returns) sum += r;
  stats.mean = sum / static_cast<double>(stats.returns.size());
  stats.min = *std::min_element(stats.returns.begin(), stats.returns.end());
  stats.max = *std::max_element(stats.returns.begin(), stats.returns.end());
  return stats;
}

EvalStats EvaluatePolicy(Policy policy, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("EvaluatePolicy: episodes < 1");
  std::vector<double> returns;
  returns.reserve(static_cast<size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    EnvState s = ResetCartPole(DeriveSeed(seed, static_cast<std::uint64_t>(e)));
    double total = 0.0;
    while (!s.done) {
      const StepResult r = StepCartPole(s, policy.Act(s.observation()));
      total += r.reward;
      s = r.next_state;
    }
    returns.push_back(total);
  }
  return EvalStats::FromReturns(std::move(returns));
}

}  // namespace mlab
