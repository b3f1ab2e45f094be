#pragma once

#include <memory>
#include <string>
#include <vector>

#include "symdyn/types.hpp"

namespace symdyn::envs {

struct EnvSpec {
  std::string name;
  int obs_dim = 0;
  int state_dim = 0;
  int action_dim = 0;
  VecX action_low, action_high;
  int episode_limit = 0;
  std::vector<std::string> state_names;
  std::vector<std::string> action_names;
  // Marks state coordinates that live on the circle; state differences wrap
  // these through (-pi, pi].
  std::vector<bool> angle_coords;
};

struct StepResult {
  VecX obs;
  real reward = 0.0;
  bool done = false;      // time-limit truncation (no terminal states here)
  VecX state_before;      // observer state s_t the step departed from
  VecX state_after;       // s_{t+1} before any angle wrap: what a dynamics
                          // model is asked to predict
};

// wraps an angle to (-pi, pi]
real wrap_angle(real a);

class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual VecX reset(Rng& rng) = 0;
  virtual StepResult step(const VecX& action) = 0;

  virtual VecX obs_to_state(const VecX& obs) const = 0;    // observer g
  virtual VecX state_to_obs(const VecX& state) const = 0;  // inverse h
  // Analytic reward of the environment evaluated on an arbitrary transition.
  virtual real reward(const VecX& s, const VecX& a, const VecX& s2) const = 0;

  // Places the environment at an arbitrary state (episode step count resets).
  virtual void set_state(const VecX& state) = 0;
  virtual VecX state() const = 0;

  VecX clip_action(const VecX& a) const;
};

// Squared state discrepancy averaged over coordinates, with angle coordinates
// compared on the circle.
real state_sq_error(const EnvSpec& spec, const VecX& a, const VecX& b);

std::unique_ptr<Env> make_env(const std::string& name);

// The two closed-form pendulum update expressions (angle, angular velocity)
// over inputs x0 = theta, x1 = thetadot, x2 = torque. These reproduce
// PendulumEnv::step exactly and back the oracle model.
std::vector<std::string> pendulum_truth_expressions();

}  // namespace symdyn::envs
