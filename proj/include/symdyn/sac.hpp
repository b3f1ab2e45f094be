#pragma once

#include <optional>
#include <vector>

#include "symdyn/env.hpp"
#include "symdyn/nnet.hpp"
#include "symdyn/transition.hpp"
#include "symdyn/types.hpp"

namespace symdyn::sacrl {

// Bounded FIFO transition store with uniform sampling. A buffer constructed
// with a source tag rejects transitions from the other source.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity,
                        std::optional<Source> expected = std::nullopt);

  void push(Transition t);
  std::size_t size() const { return count_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return count_ == 0; }

  // Logical order: index 0 is the oldest element still stored.
  const Transition& at(std::size_t i) const;
  // Index 0 is the newest element.
  const Transition& from_newest(std::size_t i) const { return at(count_ - 1 - i); }

  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::optional<Source> expected_;
  std::vector<Transition> data_;
  std::size_t head_ = 0;   // next write slot
  std::size_t count_ = 0;
};

struct SacConfig {
  real lr = 3e-4;
  int batch = 256;
  real gamma = 0.99;
  real tau = 0.005;
  int hidden = 128;
  int depth = 2;
  std::size_t buffer_capacity = 100000;
  real log_std_min = -20.0;
  real log_std_max = 2.0;
  real init_alpha = 1.0;
};

struct SacLosses {
  real q1 = 0.0, q2 = 0.0, policy = 0.0, alpha_loss = 0.0;
  real alpha = 0.0;
  real entropy = 0.0;  // batch-mean -log pi
};

// Soft Actor-Critic: squashed-Gaussian policy, twin critics with Polyak
// targets, and entropy-temperature auto-tuning toward -action_dim. Actions
// land strictly inside the environment bounds.
class SacAgent {
 public:
  SacAgent(const envs::EnvSpec& spec, const SacConfig& cfg, std::uint64_t seed);

  // Stochastic mode draws from the agent's rng stream; deterministic mode is
  // the squashed mean and consumes no randomness.
  std::pair<VecX, real> act(const VecX& obs, bool deterministic);

  SacLosses update(const std::vector<const Transition*>& batch);

  static real critic_target(real r, real gamma, bool done, real min_q,
                            real alpha, real logp) {
    return r + gamma * (done ? 0.0 : 1.0) * (min_q - alpha * logp);
  }

  real alpha() const { return std::exp(log_alpha_); }
  const SacConfig& config() const { return cfg_; }
  const nnet::Mlp& policy_net() const { return policy_; }
  nnet::Mlp& policy_net() { return policy_; }
  const nnet::Mlp& q1_net() const { return q1_; }
  real q_value(const VecX& obs, const VecX& action) const;

 private:
  struct PolicySample {
    MatX action;  // env units
    VecX logp;
    MatX tanh_raw, sigma, xi, clamp_mask;
  };
  PolicySample sample_policy(const MatX& obs, nnet::Mlp::Tape* tape);

  SacConfig cfg_;
  int obs_dim_, act_dim_;
  VecX act_center_, act_scale_;
  real target_entropy_;
  nnet::Mlp policy_, q1_, q2_, q1t_, q2t_;
  nnet::Adam policy_opt_, q1_opt_, q2_opt_;
  real log_alpha_;
  nnet::ScalarAdam alpha_opt_;
  Rng rng_;
};

}  // namespace symdyn::sacrl
