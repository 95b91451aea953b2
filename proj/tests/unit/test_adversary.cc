#include <doctest.h>

#include <cmath>

#include "mlab/adversary.h"
#include "mlab/seeds.h"
#include "test_util.h"

using namespace mlab;
using mlab::testing::BalancingRule;
using mlab::testing::ConstantQ;

namespace {

std::shared_ptr<const Network> Shared(Network n) {
  return std::make_shared<const Network>(std::move(n));
}

// Greedy adversaries that always pick the same move.
Network Never() { return ConstantQ({1.0, 0.0}); }
Network Always() { return ConstantQ({0.0, 1.0}); }

AdversaryConfig SmallAdversary() {
  AdversaryConfig c;
  c.dqn.network = NetworkSpec{{kStateDim, 16, 2}, Activation::kReLU, 4};
  c.dqn.total_steps = 1500;
  c.dqn.learning_starts = 200;
  c.dqn.replay_capacity = 2000;
  c.dqn.batch_size = 16;
  c.dqn.seed = 5;
  return c;
}

Network RandomCartPoleNet(std::mt19937_64& rng) {
  NetworkSpec spec{{kStateDim, 8, 2}, Activation::kReLU, rng()};
  return Network(spec);
}

void CheckIdentity(const AttackEpisode& ep, const AdversaryConfig& c) {
  const double expected = (c.r_max - ep.victim_return) - c.perturbation_cost * ep.perturbations;
  CHECK(std::abs(ep.adversary_return - expected) <= 1e-9 * (1.0 + std::abs(expected)));
  CHECK(ep.regret == c.r_max - ep.victim_return);
}

}  // namespace

TEST_CASE("worst action") {
  const Observation s{};
  CHECK(WorstAction(ConstantQ({1.0, 2.0}), s) == 0);
  CHECK(WorstAction(ConstantQ({2.0, 1.0}), s) == 1);
  CHECK(WorstAction(ConstantQ({2.0, 2.0}), s) == 0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Network q = RandomCartPoleNet(rng);
    const Observation x{0.1 * i, -0.05, 0.01, 0.2};
    const Eigen::VectorXd v = q.Forward(x);
    if (v(0) != v(1)) CHECK(WorstAction(q, x) != GreedyAction(q, x));
  }
}

TEST_CASE("adversary step reward examples") {
  CHECK(AdversaryStepReward(false, false, 1.0, 500.0, 37.0) == 0.0);
  CHECK(AdversaryStepReward(true, false, 1.0, 500.0, 37.0) == -1.0);
  CHECK(AdversaryStepReward(false, true, 1.0, 500.0, 10.0) == 490.0);
  CHECK(AdversaryStepReward(true, true, 2.5, 500.0, 10.0) == 487.5);
}

TEST_CASE("adversary step reward matches the branch formula") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const bool perturb = rng() % 2, terminal = rng() % 2;
    const double cost = 3.0 * u(rng), r_max = 1.0 + 999.0 * u(rng), score = r_max * u(rng);
    double expected = 0.0;
    if (perturb) expected = -cost;
    if (terminal) expected = expected + (r_max - score);
    CHECK(std::abs(AdversaryStepReward(perturb, terminal, cost, r_max, score) - expected) <=
          1e-9);
  }
}

TEST_CASE("adversary environment step") {
  const Network q_tilde = ConstantQ({0.0, 1.0});  // worst action is 0
  Policy victim = Policy::FromRule([](const Observation&) { return 1; }, 2);
  AdversaryConfig c;
  const AdversaryEnvState start{ResetCartPole(3), 0.0, 0};

  const AdversaryStep pass = AdversaryEnvStep(start, kNoPerturb, victim, q_tilde, c);
  CHECK(pass.victim_action == 1);
  CHECK(pass.next.victim == StepCartPole(start.victim, 1).next_state);
  CHECK(pass.reward == 0.0);
  CHECK(pass.next.score == 1.0);
  CHECK(pass.next.perturbations == 0);

  const AdversaryStep hit = AdversaryEnvStep(start, kPerturb, victim, q_tilde, c);
  CHECK(hit.victim_action == 0);
  CHECK(hit.next.victim == StepCartPole(start.victim, 0).next_state);
  CHECK(hit.reward == -1.0);
  CHECK(hit.next.perturbations == 1);

  CHECK_THROWS_AS(AdversaryEnvStep(start, 2, victim, q_tilde, c), std::out_of_range);
}

TEST_CASE("a perturbation that coincides with the victim's choice only costs") {
  // Q~ argmin is 1, which is what the victim does anyway.
  const Network q_tilde = ConstantQ({1.0, 0.0});
  Policy victim = Policy::FromRule([](const Observation&) { return 1; }, 2);
  AdversaryConfig c;
  c.perturbation_cost = 0.7;
  const AdversaryEnvState start{ResetCartPole(4), 0.0, 0};
  const AdversaryStep pass = AdversaryEnvStep(start, kNoPerturb, victim, q_tilde, c);
  const AdversaryStep hit = AdversaryEnvStep(start, kPerturb, victim, q_tilde, c);
  CHECK(pass.next.victim == hit.next.victim);
  CHECK(hit.reward == pass.reward - 0.7);
}

TEST_CASE("an adversary that never perturbs a perfect victim earns nothing") {
  AdversaryConfig c;
  const AttackReport r =
      EvaluateAttack(Never(), BalancingRule(), Shared(ConstantQ({0.0, 1.0})), c, 10, 7);
  CHECK(r.mean_regret == 0.0);
  CHECK(r.mean_perturbations == 0.0);
  for (const auto& ep : r.episodes) {
    CHECK(ep.adversary_return == 0.0);
    CHECK(ep.victim_return == 500.0);
  }
}

TEST_CASE("an adversary that perturbs every step") {
  AdversaryConfig c;
  // Always forcing action 0 pushes the cart left until the pole falls.
  const AttackReport r =
      EvaluateAttack(Always(), BalancingRule(), Shared(ConstantQ({0.0, 1.0})), c, 10, 8);
  for (const auto& ep : r.episodes) {
    CHECK(ep.victim_return < 30.0);
    CHECK(ep.perturbations == static_cast<int>(ep.victim_return));
    CHECK(ep.adversary_return == doctest::Approx(-ep.perturbations + (500.0 - ep.victim_return)));
    CheckIdentity(ep, c);
  }
  CHECK(r.mean_regret > 470.0);
}

TEST_CASE("extra no-effect perturbations strictly lower the return") {
  AdversaryConfig c;
  c.perturbation_cost = 0.5;
  // The victim always pushes right, which is also Q~'s argmin: perturbing has no effect.
  const Policy victim = Policy::FromRule([](const Observation&) { return 1; }, 2);
  const auto q_tilde = Shared(ConstantQ({1.0, 0.0}));
  const AttackReport quiet = EvaluateAttack(Never(), victim, q_tilde, c, 5, 9);
  const AttackReport noisy = EvaluateAttack(Always(), victim, q_tilde, c, 5, 9);
  for (size_t i = 0; i < quiet.episodes.size(); ++i) {
    CHECK(quiet.episodes[i].victim_return == noisy.episodes[i].victim_return);
    CHECK(noisy.episodes[i].adversary_return < quiet.episodes[i].adversary_return);
    CHECK(noisy.episodes[i].adversary_return ==
          doctest::Approx(quiet.episodes[i].adversary_return -
                          0.5 * noisy.episodes[i].perturbations));
  }
}

TEST_CASE("attack reports stay in bounds and satisfy the accounting identity") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    AdversaryConfig c;
    c.perturbation_cost = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    const Network adversary = RandomCartPoleNet(rng);
    const auto q_tilde = Shared(RandomCartPoleNet(rng));
    const Policy victim = trial % 2 ? BalancingRule() : Policy::Uniform(2, rng());
    const AttackReport r = EvaluateAttack(adversary, victim, q_tilde, c, 5, rng());
    CHECK(r.mean_regret >= 0.0);
    CHECK(r.mean_regret <= 500.0);
    CHECK(r.mean_perturbations >= 0.0);
    CHECK(r.mean_perturbations <= 500.0);
    for (const auto& ep : r.episodes) {
      CHECK(ep.perturbations <= ep.victim_return);
      CheckIdentity(ep, c);
    }
  }
}

TEST_CASE("adversary training is deterministic and untrained adversaries stay in bounds") {
  const auto q_tilde = Shared(ConstantQ({0.0, 1.0}));
  AdversaryConfig c = SmallAdversary();
  const DqnResult a = TrainAdversary(BalancingRule(), q_tilde, c);
  const DqnResult b = TrainAdversary(BalancingRule(), q_tilde, c);
  CHECK(a.network == b.network);
  CHECK(a.curve.size() == b.curve.size());

  c.dqn.total_steps = 0;
  const DqnResult untrained = TrainAdversary(BalancingRule(), q_tilde, c);
  CHECK(untrained.network == Network(c.dqn.network));
  const AttackReport r = EvaluateAttack(untrained.network, BalancingRule(), q_tilde, c, 10, 3);
  CHECK(r.mean_regret >= 0.0);
  CHECK(r.mean_regret <= 500.0);
}

TEST_CASE("a trained adversary learns to topple a balancing victim") {
  // With argmin Q~ = push left, a handful of well-timed perturbations suffice.
  const auto q_tilde = Shared(ConstantQ({0.0, 1.0}));
  AdversaryConfig c = SmallAdversary();
  c.dqn.total_steps = 15000;
  c.dqn.learning_starts = 1000;
  c.dqn.replay_capacity = 15000;
  c.dqn.batch_size = 64;
  c.dqn.network.layer_sizes = {kStateDim, 64, 64, 2};
  const DqnResult trained = TrainAdversary(BalancingRule(), q_tilde, c);
  const AttackReport r = EvaluateAttack(trained.network, BalancingRule(), q_tilde, c, 20, 11);
  CHECK(r.mean_regret > 400.0);
  CHECK(r.mean_perturbations < 100.0);
}

TEST_CASE("adversary config validation") {
  AdversaryConfig c;
  c.perturbation_cost = -1.0;
  CHECK_THROWS(c.Validate());
  c = AdversaryConfig{};
  c.r_max = 0.0;
  CHECK_THROWS(c.Validate());
  c = AdversaryConfig{};
  c.dqn.network.layer_sizes = {kStateDim, 8, 3};
  CHECK_THROWS(c.Validate());
  CHECK_THROWS(AdversaryEnv(BalancingRule(), nullptr, AdversaryConfig{}));
}
