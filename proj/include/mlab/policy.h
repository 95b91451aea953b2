#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>

#include "mlab/approximator.h"
#include "mlab/cartpole.h"

namespace mlab {

// Constrained randomization rule parameters (see crop.h).
struct CropConfig {
  // Largest tolerated per-step gap Q(s, a*) - Q(s, a).
  double omega_max = 0.0;
  std::uint64_t seed = 0;
  // Admit actions with gap >= omega_max instead of <= omega_max. Only useful
  // for reproducing the literal rule; it lets the worst actions through.
  bool literal_inequality = false;

  void Validate() const;
};

// A decision rule over CartPole observations. Randomized rules carry their
// own generator, so copying a Policy forks its random stream.
class Policy {
 public:
  using Rule = std::function<int(const Observation&)>;

  static Policy Greedy(std::shared_ptr<const Network> q);
  static Policy Crop(std::shared_ptr<const Network> q, CropConfig config);
  static Policy Uniform(int num_actions, std::uint64_t seed);
  static Policy FromRule(Rule rule, int num_actions);

  int Act(const Observation& s);

  int num_actions() const { return num_actions_; }
  bool randomized() const { return kind_ == Kind::kCrop || kind_ == Kind::kUniform; }
  void Reseed(std::uint64_t seed) { rng_.seed(seed); }

 private:
  enum class Kind { kGreedy, kCrop, kUniform, kRule };

  Policy(Kind kind, int num_actions) : kind_(kind), num_actions_(num_actions) {}

  Kind kind_;
  int num_actions_;
  std::shared_ptr<const Network> q_;
  CropConfig crop_;
  Rule rule_;
  std::mt19937_64 rng_;
};

}  // namespace mlab
