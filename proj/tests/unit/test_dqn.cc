#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mlab/dqn.h"
#include "mlab/seeds.h"
#include "test_util.h"

using namespace mlab;
using mlab::testing::BalancingRule;
using mlab::testing::ConstantQ;
using mlab::testing::LinearNetwork;

TEST_CASE("greedy action") {
  const Observation s{0.1, 0.2, 0.3, 0.4};
  CHECK(GreedyAction(ConstantQ({1.0, 2.0}), s) == 1);
  CHECK(GreedyAction(ConstantQ({3.0, 3.0}), s) == 0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), b = u(rng), scale = std::abs(u(rng)) + 0.01, shift = u(rng);
    CHECK(GreedyAction(ConstantQ({a, b}), s) ==
          GreedyAction(ConstantQ({scale * a + shift, scale * b + shift}), s));
  }
}

TEST_CASE("epsilon-greedy") {
  const Observation s{};
  const Network q = ConstantQ({0.0, 1.0});
  std::mt19937_64 rng(5);
  SUBCASE("epsilon 0 is greedy") {
    for (int i = 0; i < 1000; ++i) CHECK(EpsilonGreedyAction(q, s, 0.0, rng) == 1);
  }
  SUBCASE("epsilon 1 is uniform") {
    const int n = 10000;
    int zeros = 0;
    for (int i = 0; i < n; ++i) zeros += EpsilonGreedyAction(q, s, 1.0, rng) == 0;
    const double sigma = std::sqrt(n * 0.25);
    CHECK(std::abs(zeros - n / 2.0) <= 3 * sigma);
  }
  SUBCASE("seeded sequences repeat") {
    std::mt19937_64 a(77), b(77);
    for (int i = 0; i < 500; ++i) {
      CHECK(EpsilonGreedyAction(q, s, 0.5, a) == EpsilonGreedyAction(q, s, 0.5, b));
    }
  }
}

TEST_CASE("double-Q target") {
  Transition t;
  t.r = 1.0;
  t.terminal = true;
  const Network behavior = ConstantQ({0.0, 5.0});
  const Network target = ConstantQ({2.0, 3.0});
  CHECK(DoubleQTarget(behavior, target, t, 0.99) == 1.0);
  t.terminal = false;
  CHECK(DoubleQTarget(behavior, target, t, 0.99) == doctest::Approx(3.97).epsilon(1e-12));
  // Same network on both sides: ordinary max-Q target.
  CHECK(DoubleQTarget(target, target, t, 0.99) == doctest::Approx(1.0 + 0.99 * 3.0));
  const Network other = ConstantQ({7.0, -1.0});
  CHECK(DoubleQTarget(other, other, t, 0.5) == doctest::Approx(1.0 + 0.5 * 7.0));
}

TEST_CASE("epsilon schedule") {
  DqnConfig c;
  c.total_steps = 1000;
  CHECK(c.decay_steps() == 100);
  CHECK(EpsilonAt(c, 0) == 1.0);
  CHECK(EpsilonAt(c, 50) == doctest::Approx(0.525));
  CHECK(EpsilonAt(c, 100) == doctest::Approx(0.05));
  CHECK(EpsilonAt(c, 900) == doctest::Approx(0.05));
}

TEST_CASE("config validation") {
  DqnConfig c;
  CHECK_NOTHROW(c.Validate());
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
  c = DqnConfig{};
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
  c = DqnConfig{};
  c.replay_capacity = 0;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
  c = DqnConfig{};
  c.target_update_period = 0;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
  c = DqnConfig{};
  c.epsilon_end = -0.1;
  CHECK_THROWS_AS(c.Validate(), std::invalid_argument);
}

TEST_CASE("ring buffer overwrites the oldest element") {
  RingBuffer<int> ring(5);
  std::mt19937_64 rng(3);
  std::vector<int> all;
  for (int i = 0; i < 100000; ++i) {
    const int v = static_cast<int>(rng() % 1000000);
    ring.Add(v);
    all.push_back(v);
    CHECK(ring.size() <= 5);
    if (i % 997 == 0 || i < 10) {
      const size_t kept = std::min<size_t>(all.size(), 5);
      REQUIRE(ring.size() == kept);
      for (size_t k = 0; k < kept; ++k) CHECK(ring[k] == all[all.size() - kept + k]);
    }
  }
  CHECK(ring.total_added() == 100000);
  CHECK_THROWS_AS(RingBuffer<int>(0), std::invalid_argument);
}

TEST_CASE("target network equals the behavior network at the last multiple of tau") {
  DqnConfig c;
  c.network = NetworkSpec{{4, 8, 2}, Activation::kReLU, 3};
  c.total_steps = 700;
  c.learning_starts = 50;
  c.batch_size = 16;
  c.target_update_period = 100;
  c.replay_capacity = 300;
  Network snapshot(c.network);
  int checks = 0;
  TrainDqn(
      c, [] { return std::make_unique<CartPoleEnv>(); },
      [&](std::int64_t step, const Network& behavior, const Network& target) {
        if (step % c.target_update_period == 0) {
          CHECK(target == behavior);
          snapshot = behavior;
        } else {
          CHECK(target == snapshot);
        }
        ++checks;
      });
  CHECK(checks == 700);
}

TEST_CASE("training is deterministic and records a curve") {
  DqnConfig c;
  c.network = NetworkSpec{{4, 16, 2}, Activation::kReLU, 9};
  c.total_steps = 1500;
  c.learning_starts = 100;
  c.seed = 4;
  const DqnResult a = TrainVictim(c);
  const DqnResult b = TrainVictim(c);
  CHECK(a.network == b.network);
  REQUIRE(!a.curve.empty());
  std::int64_t steps = 0;
  for (size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].episode == static_cast<std::int64_t>(i));
    CHECK(a.curve[i].episode_return == a.curve[i].steps);
    steps += a.curve[i].steps;
  }
  CHECK(steps <= 1500);
  c.seed = 5;
  CHECK_FALSE(TrainVictim(c).network == a.network);
}

TEST_CASE("zero training steps leaves a poor policy") {
  DqnConfig c;
  c.total_steps = 0;
  const DqnResult r = TrainVictim(c);
  CHECK(r.network == Network(c.network));
  const EvalStats stats =
      EvaluatePolicy(Policy::Greedy(std::make_shared<const Network>(r.network)), 20, 1);
  CHECK(stats.mean < 100.0);
}

TEST_CASE("TD loss falls over the first 1000 updates on a fixed buffer") {
  // Random-policy transitions; the buffer never changes.
  std::vector<Transition> buffer;
  std::mt19937_64 env_rng(12);
  for (std::uint64_t ep = 0; buffer.size() < 4000; ++ep) {
    EnvState s = ResetCartPole(DeriveSeed(99, ep));
    while (!s.done) {
      const int a = static_cast<int>(env_rng() % 2);
      const StepResult r = StepCartPole(s, a);
      buffer.push_back({s.observation(), a, r.reward, r.next_state.observation(),
                        r.terminal && !r.truncated});
      s = r.next_state;
    }
  }
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DqnConfig c;
    c.network.seed = seed;
    DqnLearner learner(c);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, buffer.size() - 1);
    std::vector<const Transition*> batch(64);
    std::vector<double> losses;
    for (int u = 1; u <= 1000; ++u) {
      for (auto& p : batch) p = &buffer[pick(rng)];
      losses.push_back(learner.Update(batch));
      if (u % c.target_update_period == 0) learner.SyncTarget();
    }
    const double early = std::accumulate(losses.begin(), losses.begin() + 100, 0.0);
    const double late = std::accumulate(losses.end() - 100, losses.end(), 0.0);
    improved += late < early;
  }
  CHECK(improved >= 9);
}

TEST_CASE("policy evaluation") {
  SUBCASE("a balancing rule reaches the cap in every episode") {
    const EvalStats stats = EvaluatePolicy(BalancingRule(), 50, 7);
    for (double r : stats.returns) CHECK(r == 500.0);
    CHECK(stats.mean == 500.0);
    CHECK(stats.min == 500.0);
  }
  SUBCASE("same policy and seed give the same stats") {
    const EvalStats a = EvaluatePolicy(Policy::Uniform(2, 3), 20, 11);
    const EvalStats b = EvaluatePolicy(Policy::Uniform(2, 3), 20, 11);
    CHECK(a.returns == b.returns);
  }
  SUBCASE("uniform random policy is weak") {
    const EvalStats stats = EvaluatePolicy(Policy::Uniform(2, 5), 100, 2);
    CHECK(stats.mean < 100.0);
    const double sum = std::accumulate(stats.returns.begin(), stats.returns.end(), 0.0);
    CHECK(std::abs(stats.mean - sum / 100.0) <= 1e-9);
    CHECK(stats.min <= stats.mean);
    CHECK(stats.max >= stats.mean);
  }
  SUBCASE("no episodes") {
    CHECK_THROWS_AS(EvaluatePolicy(Policy::Uniform(2, 5), 0, 2), std::invalid_argument);
  }
}

TEST_CASE("policy actions stay in range") {
  std::mt19937_64 rng(4);
  Policy uniform = Policy::Uniform(3, 8);
  for (int i = 0; i < 1000; ++i) {
    const int a = uniform.Act({});
    CHECK(a >= 0);
    CHECK(a < 3);
  }
  Policy bad = Policy::FromRule([](const Observation&) { return 5; }, 2);
  CHECK_THROWS_AS(bad.Act({}), std::out_of_range);
}
