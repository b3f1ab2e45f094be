#include "symdyn/env.hpp"

#include <cmath>
#include <stdexcept>

namespace symdyn::envs {

real wrap_angle(real a) {
  real w = std::remainder(a, 2.0 * M_PI);
  if (w <= -M_PI) w += 2.0 * M_PI;
  return w;
}

VecX Env::clip_action(const VecX& a) const {
  const EnvSpec& sp = spec();
  if (a.size() != sp.action_dim)
    throw std::invalid_argument("action dimension mismatch for " + sp.name);
  return a.cwiseMax(sp.action_low).cwiseMin(sp.action_high);
}

real state_sq_error(const EnvSpec& spec, const VecX& a, const VecX& b) {
  real sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const bool ang = i < static_cast<Eigen::Index>(spec.angle_coords.size()) &&
                     spec.angle_coords[static_cast<std::size_t>(i)];
    const real d = ang ? wrap_angle(a(i) - b(i)) : a(i) - b(i);
    sum += d * d;
  }
  return sum / static_cast<real>(a.size());
}

// ---------------------------------------------------------------------------
// Pendulum: the classic torque-limited swing-up. The update law is written to
// mirror the closed-form expressions in pendulum_truth_expressions() exactly,
// operation for operation, so the oracle model is bit-identical to step().

namespace {

class PendulumEnv final : public Env {
 public:
  PendulumEnv() {
    spec_.name = "pendulum";
    spec_.obs_dim = 3;
    spec_.state_dim = 2;
    spec_.action_dim = 1;
    spec_.action_low = VecX::Constant(1, -2.0);
    spec_.action_high = VecX::Constant(1, 2.0);
    spec_.episode_limit = 200;
    spec_.state_names = {"theta", "thetadot"};
    spec_.action_names = {"torque"};
    spec_.angle_coords = {true, false};
  }

  const EnvSpec& spec() const override { return spec_; }

  VecX reset(Rng& rng) override {
    theta_ = uniform(rng, -M_PI, M_PI);
    thetadot_ = uniform(rng, -1.0, 1.0);
    steps_ = 0;
    return observation();
  }

  StepResult step(const VecX& action) override {
    const real u = std::clamp(action(0), -2.0, 2.0);
    StepResult out;
    out.state_before = state();

    const real thetadot_next =
        std::clamp(thetadot_ + ((15.0 * std::sin(theta_)) +
                                (3.0 * std::clamp(u, -2.0, 2.0))) * 0.05,
                   -8.0, 8.0);
    const real theta_next = theta_ + thetadot_next * 0.05;  // pre-wrap

    out.state_after = VecX(2);
    out.state_after << theta_next, thetadot_next;
    out.reward = reward(out.state_before, action, out.state_after);

    theta_ = wrap_angle(theta_next);
    thetadot_ = thetadot_next;
    ++steps_;
    out.done = steps_ >= spec_.episode_limit;
    out.obs = observation();
    return out;
  }

  VecX obs_to_state(const VecX& obs) const override {
    VecX s(2);
    s << std::atan2(obs(1), obs(0)), obs(2);
    return s;
  }

  VecX state_to_obs(const VecX& s) const override {
    VecX o(3);
    o << std::cos(s(0)), std::sin(s(0)), s(1);
    return o;
  }

  real reward(const VecX& s, const VecX& a, const VecX& s2) const override {
    const real th = wrap_angle(s(0));
    const real u = std::clamp(a(0), -2.0, 2.0);
    return -(th * th + 0.1 * s2(1) * s2(1) + 0.001 * u * u);
  }

  void set_state(const VecX& s) override {
    theta_ = wrap_angle(s(0));
    thetadot_ = std::clamp(s(1), -8.0, 8.0);
    steps_ = 0;
  }

  VecX state() const override {
    VecX s(2);
    s << theta_, thetadot_;
    return s;
  }

 private:
  VecX observation() const { return state_to_obs(state()); }

  EnvSpec spec_;
  real theta_ = 0.0, thetadot_ = 0.0;
  int steps_ = 0;
};

// ---------------------------------------------------------------------------
// Reacher: two-link planar arm whose joints follow hand-designed PD
// regulators around action-shifted setpoints; dynamics are decoupled double
// integrators, which is exactly the interface the PD loop exposes.

constexpr real kReacherDq = 0.3;
constexpr real kReacherKp = 40.0;
constexpr real kReacherKd = 4.0;
constexpr real kReacherDt = 0.02;
constexpr real kReacherQdMax = 10.0;
constexpr real kLink1 = 0.1, kLink2 = 0.1;

class ReacherEnv final : public Env {
 public:
  ReacherEnv() {
    spec_.name = "reacher";
    spec_.obs_dim = 10;
    spec_.state_dim = 6;
    spec_.action_dim = 2;
    spec_.action_low = VecX::Constant(2, -1.0);
    spec_.action_high = VecX::Constant(2, 1.0);
    spec_.episode_limit = 50;
    spec_.state_names = {"q0", "q1", "qd0", "qd1", "tx", "ty"};
    spec_.action_names = {"a0", "a1"};
    spec_.angle_coords = {true, true, false, false, false, false};
  }

  const EnvSpec& spec() const override { return spec_; }

  VecX reset(Rng& rng) override {
    q_[0] = uniform(rng, -M_PI, M_PI);
    q_[1] = uniform(rng, -M_PI, M_PI);
    qd_[0] = qd_[1] = 0.0;
    const real r = std::sqrt(uniform(rng, 0.05 * 0.05, 0.2 * 0.2));
    const real phi = uniform(rng, -M_PI, M_PI);
    target_[0] = r * std::cos(phi);
    target_[1] = r * std::sin(phi);
    steps_ = 0;
    return state_to_obs(state());
  }

  StepResult step(const VecX& action) override {
    const VecX a = clip_action(action);
    StepResult out;
    out.state_before = state();

    out.state_after = VecX(6);
    for (int i = 0; i < 2; ++i) {
      const real torque = kReacherKp * (a(i) * kReacherDq) - kReacherKd * qd_[i];
      const real qd_next =
          std::clamp(qd_[i] + torque * kReacherDt, -kReacherQdMax, kReacherQdMax);
      const real q_next = q_[i] + qd_next * kReacherDt;  // pre-wrap
      out.state_after(i) = q_next;
      out.state_after(2 + i) = qd_next;
      q_[i] = wrap_angle(q_next);
      qd_[i] = qd_next;
    }
    out.state_after(4) = target_[0];
    out.state_after(5) = target_[1];

    out.reward = reward(out.state_before, a, out.state_after);
    ++steps_;
    out.done = steps_ >= spec_.episode_limit;
    out.obs = state_to_obs(state());
    return out;
  }

  VecX obs_to_state(const VecX& obs) const override {
    VecX s(6);
    s << std::atan2(obs(2), obs(0)), std::atan2(obs(3), obs(1)), obs(4), obs(5),
        obs(6), obs(7);
    return s;
  }

  VecX state_to_obs(const VecX& s) const override {
    const auto [tipx, tipy] = tip(s(0), s(1));
    VecX o(10);
    o << std::cos(s(0)), std::cos(s(1)), std::sin(s(0)), std::sin(s(1)), s(2),
        s(3), s(4), s(5), s(4) - tipx, s(5) - tipy;
    return o;
  }

  real reward(const VecX&, const VecX&, const VecX& s2) const override {
    const auto [tipx, tipy] = tip(s2(0), s2(1));
    const real dx = tipx - s2(4), dy = tipy - s2(5);
    return -std::sqrt(dx * dx + dy * dy);
  }

  void set_state(const VecX& s) override {
    q_[0] = wrap_angle(s(0));
    q_[1] = wrap_angle(s(1));
    qd_[0] = std::clamp(s(2), -kReacherQdMax, kReacherQdMax);
    qd_[1] = std::clamp(s(3), -kReacherQdMax, kReacherQdMax);
    target_[0] = s(4);
    target_[1] = s(5);
    steps_ = 0;
  }

  VecX state() const override {
    VecX s(6);
    s << q_[0], q_[1], qd_[0], qd_[1], target_[0], target_[1];
    return s;
  }

  static std::pair<real, real> tip(real q0, real q1) {
    return {kLink1 * std::cos(q0) + kLink2 * std::cos(q0 + q1),
            kLink1 * std::sin(q0) + kLink2 * std::sin(q0 + q1)};
  }

 private:
  EnvSpec spec_;
  real q_[2] = {0, 0}, qd_[2] = {0, 0}, target_[2] = {0, 0};
  int steps_ = 0;
};

// ---------------------------------------------------------------------------
// Car2d: kinematic bicycle that parks at a target; controls are acceleration
// and steering rate, the car cannot drive backward.

constexpr real kCarDt = 0.1;
constexpr real kCarWheelbase = 0.5;
constexpr real kCarSteerMax = 0.6;
constexpr real kCarVMax = 2.0;
constexpr real kCarBonusRadius = 0.1;

class Car2dEnv final : public Env {
 public:
  Car2dEnv() {
    spec_.name = "car2d";
    spec_.obs_dim = 8;
    spec_.state_dim = 7;
    spec_.action_dim = 2;
    spec_.action_low = VecX::Constant(2, -1.0);
    spec_.action_high = VecX::Constant(2, 1.0);
    spec_.episode_limit = 250;
    spec_.state_names = {"x", "y", "psi", "v", "delta", "tx", "ty"};
    spec_.action_names = {"accel", "steer_rate"};
    spec_.angle_coords = {false, false, true, false, false, false, false};
  }

  const EnvSpec& spec() const override { return spec_; }

  VecX reset(Rng& rng) override {
    x_ = y_ = 0.0;
    psi_ = uniform(rng, -M_PI, M_PI);
    v_ = 0.0;
    delta_ = 0.0;
    tx_ = uniform(rng, -2.0, 2.0);
    ty_ = uniform(rng, -2.0, 2.0);
    steps_ = 0;
    return state_to_obs(state());
  }

  StepResult step(const VecX& action) override {
    const VecX a = clip_action(action);
    StepResult out;
    out.state_before = state();

    const real delta_next = std::clamp(delta_ + a(1) * kCarDt, -kCarSteerMax, kCarSteerMax);
    const real v_next = std::clamp(v_ + a(0) * kCarDt, 0.0, kCarVMax);
    const real psi_next = psi_ + (v_next / kCarWheelbase) * std::tan(delta_next) * kCarDt;
    const real x_next = x_ + v_next * std::cos(psi_next) * kCarDt;
    const real y_next = y_ + v_next * std::sin(psi_next) * kCarDt;

    out.state_after = VecX(7);
    out.state_after << x_next, y_next, psi_next, v_next, delta_next, tx_, ty_;
    out.reward = reward(out.state_before, a, out.state_after);

    x_ = x_next;
    y_ = y_next;
    psi_ = wrap_angle(psi_next);
    v_ = v_next;
    delta_ = delta_next;
    ++steps_;
    out.done = steps_ >= spec_.episode_limit;
    out.obs = state_to_obs(state());
    return out;
  }

  VecX obs_to_state(const VecX& obs) const override {
    VecX s(7);
    s << obs(0), obs(1), std::atan2(obs(3), obs(2)), obs(4), obs(5), obs(6),
        obs(7);
    return s;
  }

  VecX state_to_obs(const VecX& s) const override {
    VecX o(8);
    o << s(0), s(1), std::cos(s(2)), std::sin(s(2)), s(3), s(4), s(5), s(6);
    return o;
  }

  real reward(const VecX&, const VecX&, const VecX& s2) const override {
    const real dx = s2(0) - s2(5), dy = s2(1) - s2(6);
    const real dist = std::sqrt(dx * dx + dy * dy);
    return -dist * kCarDt + (dist <= kCarBonusRadius ? 1.0 : 0.0);
  }

  void set_state(const VecX& s) override {
    x_ = s(0);
    y_ = s(1);
    psi_ = wrap_angle(s(2));
    v_ = std::clamp(s(3), 0.0, kCarVMax);
    delta_ = std::clamp(s(4), -kCarSteerMax, kCarSteerMax);
    tx_ = s(5);
    ty_ = s(6);
    steps_ = 0;
  }

  VecX state() const override {
    VecX s(7);
    s << x_, y_, psi_, v_, delta_, tx_, ty_;
    return s;
  }

 private:
  EnvSpec spec_;
  real x_ = 0, y_ = 0, psi_ = 0, v_ = 0, delta_ = 0, tx_ = 0, ty_ = 0;
  int steps_ = 0;
};

}  // namespace

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "pendulum") return std::make_unique<PendulumEnv>();
  if (name == "reacher") return std::make_unique<ReacherEnv>();
  if (name == "car2d") return std::make_unique<Car2dEnv>();
  throw std::invalid_argument("unknown environment '" + name + "'");
}

std::vector<std::string> pendulum_truth_expressions() {
  const std::string thetadot_next =
      "clip((x1 + (((15.0 * sin(x0)) + (3.0 * clip(x2, 2.0))) * 0.05)), 8.0)";
  const std::string theta_next = "(x0 + (" + thetadot_next + " * 0.05))";
  return {theta_next, thetadot_next};
}

}  // namespace symdyn::envs
