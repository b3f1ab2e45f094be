#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "symdyn/dynmodel.hpp"
#include "symdyn/env.hpp"
#include "symdyn/sac.hpp"
#include "symdyn/srgen.hpp"

namespace symdyn::mbpo {

// All schedule constants of the training loop plus the component settings.
// One epoch = collect n env transitions, refit the model on the env buffer,
// generate M rollouts of length k from recent states, run G gradient updates.
struct RunConfig {
  std::string env_name = "pendulum";
  std::string model_kind = "symbolic";  // symbolic | neural | oracle | none
  int epochs = 100;              // N
  int steps_per_epoch = 200;     // n
  int rollouts_per_epoch = 400;  // M
  int rollout_len = 1;           // k
  int init_chunk = 10000;        // q
  int grad_updates = 200;        // G
  int warmup_steps = 1000;
  int eval_every = 1;
  int eval_episodes = 5;
  std::uint64_t seed = 0;
  // Stop once an evaluation mean reaches this return (disabled when unset).
  std::optional<real> stop_return;

  sacrl::SacConfig sac;
  dynmodel::SymbolicModelConfig sr;
  dynmodel::NeuralModelConfig neural;
  std::size_t env_buffer_capacity = 1000000;

  std::string validate() const;  // empty when consistent
};

struct EpochMetrics {
  int epoch = 0;
  long env_steps = 0;
  bool evaluated = false;
  real eval_return_mean = 0.0;
  real eval_return_std = 0.0;
  std::vector<real> model_mse;  // per state coordinate, held out
  bool model_refit_failed = false;
  real q1_loss = 0.0, q2_loss = 0.0, policy_loss = 0.0;
  real alpha = 0.0;
  long invalid_fallbacks = 0;   // cumulative
  std::size_t be_size = 0, bpi_size = 0;
};

struct EvalResult {
  real mean = 0.0;
  real stddev = 0.0;
};

// Deterministic-policy evaluation over freshly seeded episodes; returns the
// mean and standard deviation of undiscounted returns.
EvalResult evaluate_policy(envs::Env& env, sacrl::SacAgent& agent, int episodes,
                           std::uint64_t seed);

// Uniform draw over the observer states of the newest min(q, size) records.
std::vector<VecX> sample_initial_states(const sacrl::ReplayBuffer& buffer, int q,
                                        int count, Rng& rng);

struct RunResult {
  std::vector<EpochMetrics> metrics;
  std::optional<long> steps_to_stop;  // env steps when stop_return was reached
};

class MbpoRun {
 public:
  explicit MbpoRun(const RunConfig& cfg);

  void warmup();
  EpochMetrics run_epoch();

  const RunConfig& config() const { return cfg_; }
  sacrl::SacAgent& agent() { return *agent_; }
  envs::Env& env() { return *env_; }
  const dynmodel::DynamicsModel* model() const { return model_.get(); }
  long env_steps() const { return env_steps_; }
  const sacrl::ReplayBuffer& env_buffer() const { return env_buffer_; }
  const sacrl::ReplayBuffer& model_buffer() const { return model_buffer_; }

  EvalResult evaluate(std::uint64_t eval_seed);

 private:
  void collect_env_transitions(int n, bool random_actions);

  RunConfig cfg_;
  std::unique_ptr<envs::Env> env_;
  std::unique_ptr<envs::Env> eval_env_;
  std::unique_ptr<sacrl::SacAgent> agent_;
  std::unique_ptr<dynmodel::DynamicsModel> model_;
  bool model_ready_ = false;
  sacrl::ReplayBuffer env_buffer_;
  sacrl::ReplayBuffer model_buffer_;
  Rng reset_rng_, action_rng_, rollout_rng_, batch_rng_;
  VecX obs_;
  bool need_reset_ = true;
  long env_steps_ = 0;
  int epoch_ = 0;
};

// Called after every epoch; `model` is non-null when a symbolic model is
// active (for per-epoch persistence).
using EpochSink =
    std::function<void(const EpochMetrics&, const dynmodel::DynamicsModel*)>;

RunResult run_training(const RunConfig& cfg, const EpochSink& sink = nullptr);

}  // namespace symdyn::mbpo
