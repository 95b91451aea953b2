#include "mlab/dqfd.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mlab/dqn.h"
#include "mlab/seeds.h"

namespace mlab {

void DqfdConfig::Validate() const {
  network.Validate();
  if (pretraining_steps < 0 || interaction_steps < 0) {
    throw std::invalid_argument("DqfdConfig: step counts must be >= 0");
  }
  if (!(margin >= 0.0)) throw std::invalid_argument("DqfdConfig: margin < 0");
  if (n_step < 1) throw std::invalid_argument("DqfdConfig: n_step < 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("DqfdConfig: gamma outside (0, 1]");
  }
  if (target_update_period < 1 || batch_size < 1 || log_period < 1) {
    throw std::invalid_argument("DqfdConfig: periods and batch size must be positive");
  }
  if (lambda_nstep < 0.0 || lambda_margin < 0.0 || lambda_l2 < 0.0) {
    throw std::invalid_argument("DqfdConfig: loss weights must be >= 0");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("DqfdConfig: learning rate");
  if (!(exploration_epsilon >= 0.0 && exploration_epsilon <= 1.0)) {
    throw std::invalid_argument("DqfdConfig: exploration epsilon outside [0, 1]");
  }
  if (interaction_steps > 0 && self_capacity < static_cast<size_t>(n_step)) {
    throw std::invalid_argument("DqfdConfig: self capacity too small for interaction");
  }
}

double MarginLoss(std::span<const double> q_row, int expert_action, double margin) {
  if (expert_action < 0 || expert_action >= static_cast<int>(q_row.size())) {
    throw std::out_of_range("MarginLoss: expert action out of range");
  }
  double best = q_row[0] + (expert_action == 0 ? 0.0 : margin);
  for (size_t a = 1; a < q_row.size(); ++a) {
    best = std::max(best, q_row[a] + (static_cast<int>(a) == expert_action ? 0.0 : margin));
  }
  return best - q_row[expert_action];
}

double MarginLoss(const Eigen::VectorXd& q_row, int expert_action, double margin) {
  return MarginLoss(std::span<const double>(q_row.data(), q_row.size()),
                    expert_action, margin);
}

double NStepReturn(std::span<const Transition> segment, int n, double gamma,
                   const Network& target) {
  if (segment.empty()) throw std::invalid_argument("NStepReturn: empty segment");
  if (n < 1) throw std::invalid_argument("NStepReturn: n < 1");
  double sum = 0.0;
  double discount = 1.0;
  const size_t horizon = std::min(segment.size(), static_cast<size_t>(n));
  for (size_t k = 0; k < horizon; ++k) {
    sum += discount * segment[k].r;
    discount *= gamma;
    if (segment[k].terminal) return sum;
  }
  return sum + discount * target.Forward(segment[horizon - 1].next_s).maxCoeff();
}

double NStepTarget(const NStepCache& cache, const Network& target) {
  double y = cache.reward_sum;
  if (cache.bootstrap) y += cache.discount * target.Forward(cache.bootstrap_state).maxCoeff();
  return y;
}

HybridLossResult HybridLoss(const Network& behavior, const Network& target,
                            std::span<const ReplayEntry* const> batch,
                            const DqfdConfig& config) {
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) throw std::invalid_argument("HybridLoss: empty batch");
  Eigen::MatrixXd s(kStateDim, n), next(kStateDim, n), boot(kStateDim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ReplayEntry& e = *batch[i];
    s.col(i) = Eigen::Map<const Eigen::VectorXd>(e.transition.s.data(), kStateDim);
    next.col(i) = Eigen::Map<const Eigen::VectorXd>(e.transition.next_s.data(), kStateDim);
    boot.col(i) = Eigen::Map<const Eigen::VectorXd>(e.nstep.bootstrap_state.data(), kStateDim);
  }
  const Eigen::MatrixXd q = behavior.ForwardBatch(s);
  const Eigen::MatrixXd q_next_behavior = behavior.ForwardBatch(next);
  const Eigen::MatrixXd q_next_target = target.ForwardBatch(next);
  const Eigen::MatrixXd q_boot_target = target.ForwardBatch(boot);

  HybridLossResult out;
  out.td_errors.resize(static_cast<size_t>(n));
  Eigen::MatrixXd output_grads = Eigen::MatrixXd::Zero(q.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ReplayEntry& e = *batch[i];
    const Transition& t = e.transition;
    const double q_sa = q(t.a, i);

    double y1 = t.r;
    if (!t.terminal) {
      y1 += config.gamma * q_next_target(ArgMax(q_next_behavior.col(i)), i);
    }
    double yn = e.nstep.reward_sum;
    if (e.nstep.bootstrap) yn += e.nstep.discount * q_boot_target.col(i).maxCoeff();

    const double err1 = q_sa - y1;
    const double errn = q_sa - yn;
    out.j_dq += err1 * err1;
    out.j_n += errn * errn;
    out.td_errors[static_cast<size_t>(i)] = std::abs(err1);
    output_grads(t.a, i) += 2.0 * err1 + config.lambda_nstep * 2.0 * errn;

    if (e.demo) {
      int worst = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index a = 0; a < q.rows(); ++a) {
        const double v = q(a, i) + (a == t.a ? 0.0 : config.margin);
        if (v > best) {
          best = v;
          worst = static_cast<int>(a);
        }
      }
      out.j_e += best - q_sa;
      output_grads(worst, i) += config.lambda_margin;
      output_grads(t.a, i) -= config.lambda_margin;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.j_dq *= inv_n;
  out.j_n *= inv_n;
  out.j_e *= inv_n;
  out.j_l2 = behavior.SquaredWeightNorm();
  out.loss = out.j_dq + config.lambda_nstep * out.j_n +
             config.lambda_margin * out.j_e + config.lambda_l2 * out.j_l2;
  if (!std::isfinite(out.loss)) throw DivergenceError("DQfD: non-finite loss");

  out.grads = behavior.Backward(s, output_grads);
  if (config.lambda_l2 > 0.0) {
    const auto& layers = behavior.layers();
    for (size_t l = 0; l < layers.size(); ++l) {
      out.grads.weights[l] += 2.0 * config.lambda_l2 * layers[l].weights;
    }
  }
  return out;
}

namespace {

Eigen::MatrixXd StateMatrix(const DemonstrationSet& demos) {
  Eigen::MatrixXd states(kStateDim, static_cast<Eigen::Index>(demos.size()));
  for (size_t i = 0; i < demos.size(); ++i) {
    states.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(demos.transitions[i].s.data(), kStateDim);
  }
  return states;
}

double Agreement(const Network& q, const Eigen::MatrixXd& states,
                 const DemonstrationSet& demos) {
  if (demos.size() == 0) return 0.0;
  const Eigen::MatrixXd values = q.ForwardBatch(states);
  size_t match = 0;
  for (size_t i = 0; i < demos.size(); ++i) {
    if (ArgMax(values.col(static_cast<Eigen::Index>(i))) == demos.transitions[i].a) ++match;
  }
  return static_cast<double>(match) / static_cast<double>(demos.size());
}

}  // namespace

void StandardizeInputs(Network& net, const Eigen::MatrixXd& states) {
  if (states.cols() == 0) return;
  const Eigen::VectorXd mean = states.rowwise().mean();
  Eigen::VectorXd scale =
      (states.colwise() - mean).array().square().rowwise().mean().sqrt().matrix();
  for (Eigen::Index i = 0; i < scale.size(); ++i) {
    if (!(scale[i] > 1e-8)) scale[i] = 1.0;
  }
  DenseLayer& first = net.mutable_layers().front();
  first.weights = first.weights * scale.cwiseInverse().asDiagonal();
  first.bias -= first.weights * mean;
}

DqfdResult TrainDqfd(const DemonstrationSet& demos, const DqfdConfig& config,
                     const DqfdHooks& hooks) {
  config.Validate();
  if (demos.size() == 0) throw std::invalid_argument("TrainDqfd: no demonstrations");

  Network behavior(config.network);
  const Eigen::MatrixXd demo_states = StateMatrix(demos);
  if (config.standardize_inputs) StandardizeInputs(behavior, demo_states);
  Network target = behavior;
  AdamOptimizer optimizer(behavior, AdamConfig{.step_size = config.learning_rate});
  ReplayBuffer buffer(demos, config.interaction_steps > 0 ? config.self_capacity : 0,
                      config.n_step, config.gamma, config.priority);
  std::mt19937_64 sample_rng(DeriveSeed(config.seed, "dqfd", "sample"));
  std::mt19937_64 explore_rng(DeriveSeed(config.seed, "dqfd", "explore"));
  const std::uint64_t episode_seed = DeriveSeed(config.seed, "dqfd", "episodes");

  DqfdResult result{behavior, {}, 0, 0};
  double best_agreement = -1.0;
  std::int64_t updates = 0;
  double window_loss = 0.0;
  int window_count = 0;
  std::vector<const ReplayEntry*> batch(static_cast<size_t>(config.batch_size));

  auto update = [&](int phase) {
    const std::vector<size_t> indices =
        buffer.Sample(static_cast<size_t>(config.batch_size), sample_rng);
    for (size_t i = 0; i < indices.size(); ++i) batch[i] = &buffer.at(indices[i]);
    HybridLossResult loss = HybridLoss(behavior, target, batch, config);
    optimizer.Step(behavior, loss.grads);
    buffer.UpdatePriorities(indices, loss.td_errors);
    ++updates;
    window_loss += loss.loss;
    ++window_count;
    if (updates % config.log_period == 0) {
      const double agreement = Agreement(behavior, demo_states, demos);
      result.log.push_back({updates, window_loss / window_count, agreement});
      if (config.keep_best_snapshot && agreement > best_agreement) {
        best_agreement = agreement;
        result.q = behavior;
        result.best_step = updates;
      }
      window_loss = 0.0;
      window_count = 0;
    }
    if (hooks.after_update) hooks.after_update(phase, updates, buffer);
  };

  for (std::int64_t t = 1; t <= config.pretraining_steps; ++t) {
    update(1);
    if (t % config.target_update_period == 0) target = behavior;
  }
  result.env_steps_during_pretraining = result.env_steps;

  if (config.interaction_steps > 0) {
    CartPoleEnv env;
    std::uint64_t episode = 0;
    Observation obs = env.Reset(DeriveSeed(episode_seed, episode));
    for (std::int64_t t = 1; t <= config.interaction_steps; ++t) {
      const int a = EpsilonGreedyAction(behavior, obs, config.exploration_epsilon,
                                        explore_rng);
      const EnvStep step = env.Step(a);
      ++result.env_steps;
      buffer.AddSelf({obs, a, step.reward, step.observation,
                      step.terminal && !step.truncated},
                     step.terminal);
      if (step.terminal) {
        obs = env.Reset(DeriveSeed(episode_seed, ++episode));
      } else {
        obs = step.observation;
      }
      update(2);
      if (t % config.target_update_period == 0) target = behavior;
    }
  }
  if (!config.keep_best_snapshot || best_agreement < 0.0) {
    result.q = std::move(behavior);
    result.best_step = updates;
  }
  return result;
}

double DemoAgreement(const Network& q, const DemonstrationSet& demos) {
  return Agreement(q, StateMatrix(demos), demos);
}

double RolloutAgreement(Policy candidate, Policy reference, int num_states,
                        std::uint64_t seed) {
  if (num_states < 1) throw std::invalid_argument("RolloutAgreement: num_states < 1");
  int seen = 0;
  int match = 0;
  for (std::uint64_t episode = 0; seen < num_states; ++episode) {
    EnvState s = ResetCartPole(DeriveSeed(seed, episode));
    while (!s.done && seen < num_states) {
      const Observation obs = s.observation();
      const int a = reference.Act(obs);
      if (candidate.Act(obs) == a) ++match;
      ++seen;
      s = StepCartPole(s, a).next_state;
    }
  }
  return static_cast<double>(match) / static_cast<double>(num_states);
}

Policy ImitatedPolicy(std::shared_ptr<const Network> q) {
  return Policy::Greedy(std::move(q));
}

}  // namespace mlab
