#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "symdyn/dataio.hpp"
#include "symdyn/dynmodel.hpp"

using namespace symdyn;
using dynmodel::NeuralDynamics;
using dynmodel::SymbolicDynamics;

namespace {

VecX vec(std::initializer_list<real> v) {
  VecX out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (real x : v) out(i++) = x;
  return out;
}

SymbolicDynamics truth_model() {
  std::vector<expr::ExprTree> exprs;
  for (const auto& text : envs::pendulum_truth_expressions())
    exprs.push_back(expr::parse(text, 3));
  return SymbolicDynamics(std::move(exprs), 2, 1);
}

std::vector<const Transition*> ptrs(const std::vector<Transition>& v) {
  std::vector<const Transition*> out;
  for (const auto& t : v) out.push_back(&t);
  return out;
}

}  // namespace

TEST_CASE("oracle model reproduces env.step next states exactly") {
  auto env = envs::make_env("pendulum");
  const SymbolicDynamics model = truth_model();
  Rng rng = make_rng(3);
  for (int i = 0; i < 10000; ++i) {
    const VecX s = vec({uniform(rng, -M_PI, M_PI), uniform(rng, -8.0, 8.0)});
    const VecX a = vec({uniform(rng, -2.0, 2.0)});
    env->set_state(s);
    const auto sr = env->step(a);
    const VecX pred = model.predict(s, a);
    CHECK((pred - sr.state_after).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK(model.invalid_fallbacks() == 0);
}

TEST_CASE("predict semantics and fallbacks") {
  // identity expressions hold the state for any action
  std::vector<expr::ExprTree> id;
  id.push_back(expr::parse("x0", 3));
  id.push_back(expr::parse("x1", 3));
  const SymbolicDynamics ident(std::move(id), 2, 1);
  const VecX s = vec({0.3, -1.7});
  CHECK(ident.predict(s, vec({1.0})) == s);

  const SymbolicDynamics truth = truth_model();
  const VecX out = truth.predict(vec({M_PI / 2.0, 1.0}), vec({2.0}));
  CHECK(out(1) == doctest::Approx(2.05).epsilon(1e-14));
  CHECK(out(0) == doctest::Approx(M_PI / 2.0 + 0.1025).epsilon(1e-14));

  CHECK_THROWS_AS(truth.predict(vec({1.0}), vec({0.0})), std::invalid_argument);

  // a model whose expression goes invalid falls back to holding the value
  std::vector<expr::ExprTree> partial;
  partial.push_back(expr::parse("sqrt(x0)", 3));
  partial.push_back(expr::parse("x1", 3));
  const SymbolicDynamics fb(std::move(partial), 2, 1);
  const VecX held = fb.predict(vec({-4.0, 2.0}), vec({0.0}));
  CHECK(held(0) == -4.0);  // identity hold on the invalid coordinate
  CHECK(held(1) == 2.0);
  CHECK(fb.invalid_fallbacks() == 1);
}

TEST_CASE("neural dynamics with zero weights is the identity map") {
  auto env = envs::make_env("pendulum");
  Rng rng = make_rng(5);
  // transitions with s2 == s so the fitted delta statistics are zero
  std::vector<Transition> data;
  for (int i = 0; i < 64; ++i) {
    Transition t;
    t.s = vec({uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)});
    t.a = vec({uniform(rng, -2.0, 2.0)});
    t.s2 = t.s;
    t.src = Source::Env;
    data.push_back(t);
  }
  NeuralDynamics model(2, 1);
  model.fit(ptrs(data), 1);
  for (auto& w : model.net().weights()) w.setZero();
  for (auto& b : model.net().biases()) b.setZero();
  const VecX s = vec({0.4, -0.9});
  CHECK(model.predict(s, vec({1.0})) == s);
}

TEST_CASE("fit_symbolic requires 20 transitions and recovers the pendulum") {
  auto env = envs::make_env("pendulum");
  Rng rng = make_rng(7);
  const auto small = envs::collect_exploration_dataset(*env, 1, 5, rng);
  SymbolicDynamics m(2, 1);
  CHECK_THROWS_AS(m.fit(ptrs(small), 0), std::invalid_argument);

  const auto data = envs::collect_exploration_dataset(*env, 20, 50, rng);
  dynmodel::SymbolicModelConfig cfg;
  cfg.generator.population = 250;
  cfg.generator.generations = 15;
  cfg.generator.seed = 0;
  SymbolicDynamics model(2, 1, cfg);
  const auto diag = model.fit(ptrs(data), 3);
  REQUIRE(diag.held_out_mse.size() == 2);
  CHECK(diag.held_out_mse[0] < 2e-2);
  CHECK(diag.held_out_mse[1] < 2e-2);

  // predictions stay finite over the whole state-action box
  for (int i = 0; i < 1000; ++i) {
    const VecX s = vec({uniform(rng, -M_PI, M_PI), uniform(rng, -8.0, 8.0)});
    const VecX pred = model.predict(s, vec({uniform(rng, -2.0, 2.0)}));
    CHECK(pred.allFinite());
  }
}

TEST_CASE("neural dynamics fits pendulum deltas better than chance") {
  auto env = envs::make_env("pendulum");
  Rng rng = make_rng(11);
  const auto data = envs::collect_exploration_dataset(*env, 20, 50, rng);
  NeuralDynamics model(2, 1);
  const auto diag = model.fit(ptrs(data), 5);
  REQUIRE(diag.held_out_r2.size() == 2);
  CHECK(diag.held_out_r2[0] > 0.9);
  CHECK(diag.held_out_r2[1] > 0.9);
}

TEST_CASE("rollout chains transitions with true rewards and no termination") {
  auto env = envs::make_env("pendulum");
  const SymbolicDynamics model = truth_model();

  // single step equals env.step from the same state
  const VecX s0 = vec({1.0, -2.0});
  const dynmodel::Policy zero = [&](const VecX&) { return vec({0.0}); };
  const auto one = dynmodel::rollout(model, zero, *env, s0, 1);
  REQUIRE(one.size() == 1);
  env->set_state(s0);
  const auto sr = env->step(vec({0.0}));
  CHECK(one[0].s2 == sr.state_after);
  CHECK(one[0].r == sr.reward);
  CHECK(!one[0].done);
  CHECK(one[0].src == Source::Model);

  const auto three = dynmodel::rollout(model, zero, *env, s0, 3);
  REQUIRE(three.size() == 3);
  CHECK(three[0].s2 == three[1].s);
  CHECK(three[1].s2 == three[2].s);

  // identity model + zero action: every reward equals reward(s0, 0, s0)
  std::vector<expr::ExprTree> id;
  id.push_back(expr::parse("x0", 3));
  id.push_back(expr::parse("x1", 3));
  const SymbolicDynamics ident(std::move(id), 2, 1);
  const auto held = dynmodel::rollout(ident, zero, *env, s0, 4);
  const real expect = env->reward(s0, vec({0.0}), s0);
  for (const auto& t : held) CHECK(t.r == expect);

  CHECK_THROWS_AS(dynmodel::rollout(model, zero, *env, s0, 0),
                  std::invalid_argument);
}

TEST_CASE("horizon_mse: exact model scores zero, identity model scores the gap") {
  auto env = envs::make_env("pendulum");
  const SymbolicDynamics truth = truth_model();
  Rng rng = make_rng(13);
  std::vector<VecX> starts;
  for (int i = 0; i < 50; ++i) {
    env->reset(rng);
    starts.push_back(env->state());
  }
  Rng arng = make_rng(17);
  const dynmodel::Policy random_pol = [&](const VecX&) {
    return vec({uniform(arng, -2.0, 2.0)});
  };
  const auto exact = dynmodel::horizon_mse(truth, *env, starts, random_pol, 3);
  REQUIRE(exact.size() == 3);
  for (real v : exact) CHECK(v <= 1e-12);

  std::vector<expr::ExprTree> id;
  id.push_back(expr::parse("x0", 3));
  id.push_back(expr::parse("x1", 3));
  const SymbolicDynamics ident(std::move(id), 2, 1);
  const dynmodel::Policy zero = [&](const VecX&) { return vec({0.0}); };
  const std::vector<VecX> one_start = {vec({M_PI / 2.0, 0.0})};
  const auto gap = dynmodel::horizon_mse(ident, *env, one_start, zero, 1);
  CHECK(gap[0] == doctest::Approx((0.0375 * 0.0375 + 0.75 * 0.75) / 2.0));

  CHECK_THROWS_AS(dynmodel::horizon_mse(ident, *env, one_start, zero, 0),
                  std::invalid_argument);
}

TEST_CASE("model files round trip through save and load") {
  auto env = envs::make_env("pendulum");
  const SymbolicDynamics model = truth_model();
  const std::string path = "/tmp/symdyn_model_test.tsv";
  model.save(path, env->spec());
  const SymbolicDynamics back = SymbolicDynamics::load(path, env->spec());
  Rng rng = make_rng(19);
  for (int i = 0; i < 500; ++i) {
    const VecX s = vec({uniform(rng, -M_PI, M_PI), uniform(rng, -8.0, 8.0)});
    const VecX a = vec({uniform(rng, -2.0, 2.0)});
    CHECK(back.predict(s, a) == model.predict(s, a));
  }
  CHECK_THROWS_AS(SymbolicDynamics::load("/tmp/no_such_model.tsv", env->spec()),
                  std::runtime_error);
}
