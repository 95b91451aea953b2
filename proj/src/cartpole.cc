#include "mlab/cartpole.h"

#include <cmath>
#include <random>
#include <stdexcept>

namespace mlab {

EnvState EnvState::FromObservation(const Observation& obs, int steps) {
  return EnvState{obs[0], obs[1], obs[2], obs[3], steps, false};
}

EnvState ResetCartPole(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  EnvState s;
  s.x = dist(rng);
  s.x_dot = dist(rng);
  s.theta = dist(rng);
  s.theta_dot = dist(rng);
  return s;
}

StepResult StepCartPole(const EnvState& state, int action) {
  using namespace cartpole;
  if (state.done) throw std::logic_error("StepCartPole: episode already over");
  if (action != 0 && action != 1) {
    throw std::out_of_range("StepCartPole: action must be 0 or 1");
  }
  const double total_mass = kCartMass + kPoleMass;
  const double pole_mass_length = kPoleMass * kHalfPoleLength;
  const double force = action == 1 ? kForceMagnitude : -kForceMagnitude;
  const double cos_t = std::cos(state.theta);
  const double sin_t = std::sin(state.theta);

  const double temp =
      (force + pole_mass_length * state.theta_dot * state.theta_dot * sin_t) /
      total_mass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) /
      (kHalfPoleLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;

  StepResult result;
  EnvState& next = result.next_state;
  next.x = state.x + kTau * state.x_dot;
  next.x_dot = state.x_dot + kTau * x_acc;
  next.theta = state.theta + kTau * state.theta_dot;
  next.theta_dot = state.theta_dot + kTau * theta_acc;
  next.steps = state.steps + 1;

  const bool failed = next.x < -kPositionLimit || next.x > kPositionLimit ||
                      next.theta < -kAngleLimit || next.theta > kAngleLimit;
  const bool capped = next.steps >= kEpisodeCap;
  result.reward = 1.0;
  result.terminal = failed || capped;
  result.truncated = capped && !failed;
  next.done = result.terminal;
  return result;
}

double MaxReturn() {
  return static_cast<double>(cartpole::kEpisodeCap);
}

}  // namespace mlab
