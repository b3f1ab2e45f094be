#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "symdyn/env.hpp"
#include "symdyn/expr.hpp"
#include "symdyn/nnet.hpp"
#include "symdyn/srgen.hpp"
#include "symdyn/transition.hpp"

namespace symdyn::dynmodel {

struct FitDiagnostics {
  std::vector<real> held_out_mse;  // per state coordinate
  std::vector<real> held_out_r2;
  std::vector<srgen::DimensionFit> dimension_fits;  // symbolic models only
};

// Deterministic map (s, a) -> s'. Both implementations never emit
// non-finite values.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;
  virtual VecX predict(const VecX& s, const VecX& a) const = 0;
  virtual FitDiagnostics fit(const std::vector<const Transition*>& transitions,
                             std::uint64_t seed) = 0;
  virtual std::string kind() const = 0;
};

struct SymbolicModelConfig {
  srgen::GeneratorConfig generator;
  int subsample = 400;  // SR input rows per fit
};

// Ordered expression set, one tree per state coordinate, over inputs
// [state; action] in original units. A coordinate whose expression cannot be
// evaluated at a query point falls back to holding its current value; the
// fallback counter records how often that happened.
class SymbolicDynamics final : public DynamicsModel {
 public:
  SymbolicDynamics(int state_dim, int action_dim, SymbolicModelConfig cfg = {});
  SymbolicDynamics(std::vector<expr::ExprTree> exprs, int state_dim,
                   int action_dim);

  VecX predict(const VecX& s, const VecX& a) const override;
  FitDiagnostics fit(const std::vector<const Transition*>& transitions,
                     std::uint64_t seed) override;
  std::string kind() const override { return "symbolic"; }

  const std::vector<expr::ExprTree>& expressions() const { return exprs_; }
  long invalid_fallbacks() const { return fallbacks_; }

  void save(const std::string& path, const envs::EnvSpec& spec) const;
  static SymbolicDynamics load(const std::string& path, const envs::EnvSpec& spec);

 private:
  int state_dim_, action_dim_;
  SymbolicModelConfig cfg_;
  std::vector<expr::ExprTree> exprs_;
  mutable long fallbacks_ = 0;
};

struct NeuralModelConfig {
  int hidden = 200;
  int epochs_over_data = 300;
  int batch = 64;
  real lr = 1e-3;
};

// One-hidden-layer baseline predicting the state delta from normalized
// [state; action]; next state = s + denormalized output.
class NeuralDynamics final : public DynamicsModel {
 public:
  NeuralDynamics(int state_dim, int action_dim, NeuralModelConfig cfg = {});

  VecX predict(const VecX& s, const VecX& a) const override;
  FitDiagnostics fit(const std::vector<const Transition*>& transitions,
                     std::uint64_t seed) override;
  std::string kind() const override { return "neural"; }

  nnet::Mlp& net() { return net_; }

 private:
  int state_dim_, action_dim_;
  NeuralModelConfig cfg_;
  nnet::Mlp net_;
  VecX in_mean_, in_std_, out_mean_, out_std_;
  bool fitted_ = false;
};

using Policy = std::function<VecX(const VecX& obs)>;

// k-step model rollout from s0 under `policy` (observations come from the
// inverse observer); rewards are the environment's analytic reward function
// and done stays false -- these tasks only end by time limit.
std::vector<Transition> rollout(const DynamicsModel& model, const Policy& policy,
                                const envs::Env& env, const VecX& s0, int k);

// Rolls the model and the true environment forward h steps from every start
// state under the action sequence the policy produces on the TRUE trajectory;
// returns the mean squared state discrepancy per step index.
std::vector<real> horizon_mse(const DynamicsModel& model, envs::Env& env,
                              const std::vector<VecX>& start_states,
                              const Policy& policy, int h);

}  // namespace symdyn::dynmodel
