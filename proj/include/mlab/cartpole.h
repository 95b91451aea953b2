#pragma once

// Classic cart-pole balancing task with Euler integration and a 500 step
// episode cap. State is passed by value; nothing is mutated behind the
// caller's back.

#include <array>
#include <cstdint>

namespace mlab {

inline constexpr int kStateDim = 4;
inline constexpr int kCartPoleActions = 2;  // 0 = push left, 1 = push right

using Observation = std::array<double, kStateDim>;

namespace cartpole {

inline constexpr double kGravity = 9.8;
inline constexpr double kCartMass = 1.0;
inline constexpr double kPoleMass = 0.1;
inline constexpr double kHalfPoleLength = 0.5;
inline constexpr double kForceMagnitude = 10.0;
inline constexpr double kTau = 0.02;
inline constexpr double kPositionLimit = 2.4;
// 12 degrees.
inline constexpr double kAngleLimit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
inline constexpr int kEpisodeCap = 500;

}  // namespace cartpole

struct EnvState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
  int steps = 0;
  bool done = false;

  Observation observation() const { return {x, x_dot, theta, theta_dot}; }
  static EnvState FromObservation(const Observation& obs, int steps = 0);

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepResult {
  EnvState next_state;
  double reward = 0.0;
  bool terminal = false;
  // True when the episode ended only because of the step cap.
  bool truncated = false;
};

EnvState ResetCartPole(std::uint64_t seed);

// Throws std::logic_error on a finished state and std::out_of_range on an
// action outside {0, 1}.
StepResult StepCartPole(const EnvState& state, int action);

double MaxReturn();

}  // namespace mlab
