#include "mlab/policy.h"

#include <cmath>
#include <stdexcept>

#include "mlab/crop.h"

namespace mlab {

void CropConfig::Validate() const {
  if (!(omega_max >= 0.0)) {
    throw std::invalid_argument("CropConfig: omega_max must be >= 0");
  }
}

Policy Policy::Greedy(std::shared_ptr<const Network> q) {
  if (!q) throw std::invalid_argument("Policy::Greedy: null network");
  Policy p(Kind::kGreedy, q->num_actions());
  p.q_ = std::move(q);
  return p;
}

Policy Policy::Crop(std::shared_ptr<const Network> q, CropConfig config) {
  if (!q) throw std::invalid_argument("Policy::Crop: null network");
  config.Validate();
  Policy p(Kind::kCrop, q->num_actions());
  p.q_ = std::move(q);
  p.crop_ = config;
  p.rng_.seed(config.seed);
  return p;
}

Policy Policy::Uniform(int num_actions, std::uint64_t seed) {
  if (num_actions < 1) throw std::invalid_argument("Policy::Uniform: no actions");
  Policy p(Kind::kUniform, num_actions);
  p.rng_.seed(seed);
  return p;
}

Policy Policy::FromRule(Rule rule, int num_actions) {
  if (!rule || num_actions < 1) {
    throw std::invalid_argument("Policy::FromRule: empty rule");
  }
  Policy p(Kind::kRule, num_actions);
  p.rule_ = std::move(rule);
  return p;
}

int Policy::Act(const Observation& s) {
  switch (kind_) {
    case Kind::kGreedy:
      return ArgMax(q_->Forward(s));
    case Kind::kCrop: {
      const auto feasible = FeasibleActions(q_->Forward(s), crop_.omega_max,
                                            crop_.literal_inequality);
      if (feasible.size() == 1) return feasible.front();
      std::uniform_int_distribution<size_t> pick(0, feasible.size() - 1);
      return feasible[pick(rng_)];
    }
    case Kind::kUniform: {
      std::uniform_int_distribution<int> pick(0, num_actions_ - 1);
      return pick(rng_);
    }
    case Kind::kRule: {
      const int a = rule_(s);
      if (a < 0 || a >= num_actions_) {
        throw std::out_of_range("Policy: rule returned invalid action");
      }
      return a;
    }
  }
  throw std::logic_error("Policy: unknown kind");
}

}  // namespace mlab
