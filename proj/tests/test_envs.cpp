#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "symdyn/dataio.hpp"
#include "symdyn/env.hpp"
#include "symdyn/expr.hpp"

using namespace symdyn;

namespace {

VecX vec(std::initializer_list<real> v) {
  VecX out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (real x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("pendulum step matches the closed-form update") {
  auto env = envs::make_env("pendulum");
  env->set_state(vec({M_PI / 2.0, 1.0}));
  const auto sr = env->step(vec({2.0}));
  CHECK(sr.state_after(1) == doctest::Approx(2.05).epsilon(1e-14));
  CHECK(sr.state_after(0) == doctest::Approx(M_PI / 2.0 + 0.1025).epsilon(1e-14));

  env->set_state(vec({0.0, 0.0}));
  const auto fixed = env->step(vec({0.0}));
  CHECK(fixed.state_after(0) == 0.0);
  CHECK(fixed.state_after(1) == 0.0);
  CHECK(fixed.reward == 0.0);

  // angular velocity cap
  env->set_state(vec({M_PI / 2.0, 7.9}));
  const auto capped = env->step(vec({2.0}));
  CHECK(capped.state_after(1) == 8.0);
}

TEST_CASE("pendulum step agrees with the paper expressions bitwise") {
  auto env = envs::make_env("pendulum");
  std::vector<expr::ExprTree> truth;
  for (const auto& text : envs::pendulum_truth_expressions())
    truth.push_back(expr::parse(text, 3));

  Rng rng = make_rng(7);
  std::vector<real> in(3);
  for (int i = 0; i < 2000; ++i) {
    const VecX s = vec({uniform(rng, -M_PI, M_PI), uniform(rng, -8.0, 8.0)});
    const VecX u = vec({uniform(rng, -2.0, 2.0)});
    env->set_state(s);
    const auto sr = env->step(u);
    in[0] = s(0);
    in[1] = s(1);
    in[2] = u(0);
    CHECK(*expr::evaluate(truth[0], in) == sr.state_after(0));
    CHECK(*expr::evaluate(truth[1], in) == sr.state_after(1));
  }
}

TEST_CASE("pendulum invariants: wrap and velocity bound") {
  auto env = envs::make_env("pendulum");
  Rng rng = make_rng(9);
  env->reset(rng);
  for (int i = 0; i < 3000; ++i) {
    const auto sr = env->step(vec({uniform(rng, -2.0, 2.0)}));
    const VecX s = env->state();
    CHECK(s(0) > -M_PI);
    CHECK(s(0) <= M_PI);
    CHECK(std::fabs(s(1)) <= 8.0);
    if (sr.done) env->reset(rng);
  }
}

TEST_CASE("pendulum observer and inverse") {
  auto env = envs::make_env("pendulum");
  CHECK(env->obs_to_state(vec({1.0, 0.0, 0.0})) == vec({0.0, 0.0}));
  const VecX s = env->obs_to_state(vec({0.0, 1.0, 2.0}));
  CHECK(s(0) == doctest::Approx(M_PI / 2.0));
  CHECK(s(1) == 2.0);

  Rng rng = make_rng(11);
  for (int i = 0; i < 200; ++i) {
    const VecX state = vec({uniform(rng, -M_PI, M_PI), uniform(rng, -8.0, 8.0)});
    const VecX back = env->obs_to_state(env->state_to_obs(state));
    CHECK(back(0) == doctest::Approx(state(0)).epsilon(1e-12));
    CHECK(back(1) == state(1));
    const VecX obs = env->state_to_obs(state);
    const VecX obs2 = env->state_to_obs(env->obs_to_state(obs));
    for (int j = 0; j < 3; ++j)
      CHECK(obs2(j) == doctest::Approx(obs(j)).epsilon(1e-12));
  }
}

TEST_CASE("reacher kinematics and PD regulator") {
  auto env = envs::make_env("reacher");
  // tip at q = 0 is (l1 + l2, 0)
  env->set_state(vec({0.0, 0.0, 0.0, 0.0, 0.2, 0.0}));
  const auto obs = env->state_to_obs(env->state());
  CHECK(obs(8) == doctest::Approx(0.0));  // target - tip = 0
  CHECK(obs(9) == doctest::Approx(0.0));

  // zero action and zero velocity: the joints hold position
  const auto sr = env->step(vec({0.0, 0.0}));
  CHECK(sr.state_after(0) == 0.0);
  CHECK(sr.state_after(1) == 0.0);
  CHECK(sr.reward == doctest::Approx(0.0));  // tip exactly at target

  auto env2 = envs::make_env("reacher");
  env2->set_state(vec({0.1, -0.2, 0.0, 0.0, 0.1, 0.1}));
  const auto sr2 = env2->step(vec({0.5, -0.5}));
  // semi-implicit euler with kp=40, kd=4, dq=0.3, dt=0.02
  const real t0 = 40.0 * (0.5 * 0.3);
  const real qd0 = 0.02 * t0;
  CHECK(sr2.state_after(2) == doctest::Approx(qd0).epsilon(1e-12));
  CHECK(sr2.state_after(0) == doctest::Approx(0.1 + 0.02 * qd0).epsilon(1e-12));
}

TEST_CASE("reacher observer round trip and reward") {
  auto env = envs::make_env("reacher");
  Rng rng = make_rng(13);
  for (int i = 0; i < 200; ++i) {
    const VecX s = vec({uniform(rng, -M_PI, M_PI), uniform(rng, -M_PI, M_PI),
                        uniform(rng, -10.0, 10.0), uniform(rng, -10.0, 10.0),
                        uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2)});
    const VecX obs = env->state_to_obs(s);
    CHECK(obs.size() == 10);
    const VecX back = env->obs_to_state(obs);
    CHECK(back.size() == 6);
    for (int j = 0; j < 6; ++j)
      CHECK(back(j) == doctest::Approx(s(j)).epsilon(1e-12));
  }
  // reward is the negative tip-target distance of the next state
  const VecX s2 = vec({0.0, 0.0, 0.0, 0.0, 0.1, 0.0});
  CHECK(env->reward(s2, vec({0.0, 0.0}), s2) == doctest::Approx(-0.1));
}

TEST_CASE("car2d dynamics, clipping and reward") {
  auto env = envs::make_env("car2d");
  env->set_state(vec({0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0}));
  const auto still = env->step(vec({0.0, 0.0}));
  CHECK(still.state_after(0) == 0.0);
  CHECK(still.state_after(1) == 0.0);

  env->set_state(vec({0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0}));
  const auto fwd = env->step(vec({0.0, 0.0}));
  CHECK(fwd.state_after(0) == doctest::Approx(0.1));
  CHECK(fwd.state_after(1) == 0.0);

  // no backward driving
  env->set_state(vec({0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0}));
  const auto rev = env->step(vec({-1.0, 0.0}));
  CHECK(rev.state_after(3) == 0.0);

  // reward: -dist * dt plus the parking bonus inside 0.1 m
  const VecX parked = vec({1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0});
  CHECK(env->reward(parked, vec({0.0, 0.0}), parked) == doctest::Approx(1.0));
  const VecX away = vec({0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0});
  CHECK(env->reward(away, vec({0.0, 0.0}), away) == doctest::Approx(-0.1));
}

TEST_CASE("car2d speed stays nonnegative under random action sequences") {
  auto env = envs::make_env("car2d");
  Rng rng = make_rng(17);
  env->reset(rng);
  for (int i = 0; i < 20000; ++i) {
    const auto sr =
        env->step(vec({uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5)}));
    CHECK(env->state()(3) >= 0.0);
    CHECK(std::fabs(env->state()(4)) <= 0.6);
    if (sr.done) env->reset(rng);
  }
}

TEST_CASE("resets are deterministic and within the documented ranges") {
  for (const char* name : {"pendulum", "reacher", "car2d"}) {
    auto env = envs::make_env(name);
    Rng a = make_rng(21), b = make_rng(21);
    const VecX o1 = env->reset(a);
    const VecX o2 = env->reset(b);
    CHECK(o1 == o2);
  }

  auto pend = envs::make_env("pendulum");
  Rng rng = make_rng(23);
  for (int i = 0; i < 3000; ++i) {
    pend->reset(rng);
    CHECK(std::fabs(pend->state()(1)) <= 1.0);
  }

  auto reach = envs::make_env("reacher");
  for (int i = 0; i < 1000; ++i) {
    reach->reset(rng);
    const real r = reach->state().tail(2).norm();
    CHECK(r >= 0.05);
    CHECK(r <= 0.2);
  }

  auto car = envs::make_env("car2d");
  for (int i = 0; i < 100; ++i) {
    car->reset(rng);
    CHECK(car->state()(3) == 0.0);
  }
}

TEST_CASE("episode limits") {
  const std::pair<const char*, int> limits[] = {
      {"pendulum", 200}, {"reacher", 50}, {"car2d", 250}};
  for (const auto& [name, limit] : limits) {
    auto env = envs::make_env(name);
    CHECK(env->spec().episode_limit == limit);
    Rng rng = make_rng(1);
    env->reset(rng);
    int steps = 0;
    while (true) {
      ++steps;
      if (env->step(VecX::Zero(env->spec().action_dim)).done) break;
    }
    CHECK(steps == limit);
  }
  CHECK_THROWS_AS(envs::make_env("lander"), std::invalid_argument);
}

TEST_CASE("exploration dataset honors counts, holds and determinism") {
  auto env = envs::make_env("pendulum");
  Rng rng = make_rng(29);
  const auto data = envs::collect_exploration_dataset(*env, 10, 50, rng);
  CHECK(data.size() == 500);

  // a trajectory with hold 10 plays at most 5 distinct actions
  auto env2 = envs::make_env("pendulum");
  Rng rng2 = make_rng(31);
  const auto one = envs::collect_exploration_dataset(*env2, 10, 50, rng2);
  int distinct = 1;
  for (int t = 451; t < 500; ++t)  // trajectory index 9 -> hold period 10
    if (one[static_cast<std::size_t>(t)].a(0) !=
        one[static_cast<std::size_t>(t - 1)].a(0))
      ++distinct;
  CHECK(distinct <= 5);

  auto env3 = envs::make_env("pendulum");
  Rng rng3 = make_rng(29);
  const auto again = envs::collect_exploration_dataset(*env3, 10, 50, rng3);
  REQUIRE(again.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(again[i].a == data[i].a);
    CHECK(again[i].s2 == data[i].s2);
  }

  CHECK_THROWS_AS(envs::collect_exploration_dataset(*env, 0, 10, rng),
                  std::invalid_argument);
}

TEST_CASE("csv round trip of an exploration dataset") {
  auto env = envs::make_env("pendulum");
  Rng rng = make_rng(37);
  const auto data = envs::collect_exploration_dataset(*env, 4, 25, rng);
  const std::string csv_text = dataio::transitions_to_csv(env->spec(), data);
  const std::string path = "/tmp/symdyn_test_envs.csv";
  dataio::atomic_write(path, csv_text);
  const auto csv = dataio::read_csv(path);
  CHECK(csv.header.size() == 2 + 1 + 2 + 2);
  CHECK(csv.rows.size() == 100);
  const auto back = dataio::transitions_from_csv(env->spec(), csv);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].s == data[i].s);  // shortest round-trip decimals
    CHECK(back[i].a == data[i].a);
    CHECK(back[i].s2 == data[i].s2);
    CHECK(back[i].r == data[i].r);
  }

  const auto ds = dataio::dataset_from_csv(csv, "next_thetadot");
  CHECK(ds.X.cols() == 3);  // theta, thetadot, torque
  CHECK(ds.rows() == 100);
  CHECK_THROWS(dataio::dataset_from_csv(csv, "not_a_column"));
}

TEST_CASE("state_sq_error wraps angle coordinates") {
  auto env = envs::make_env("pendulum");
  const VecX a = vec({M_PI - 0.05, 1.0});
  const VecX b = vec({-M_PI + 0.05, 1.0});
  CHECK(envs::state_sq_error(env->spec(), a, b) ==
        doctest::Approx(0.1 * 0.1 / 2.0));
}
