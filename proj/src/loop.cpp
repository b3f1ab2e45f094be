#include "symdyn/loop.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace symdyn::mbpo {

std::string RunConfig::validate() const {
  if (model_kind != "symbolic" && model_kind != "neural" &&
      model_kind != "oracle" && model_kind != "none")
    return "model_kind must be one of symbolic|neural|oracle|none";
  if (model_kind == "oracle" && env_name != "pendulum")
    return "oracle model is only available for the pendulum environment";
  if (epochs < 1) return "N (epochs) must be >= 1";
  if (steps_per_epoch < 1) return "n (steps per epoch) must be >= 1";
  if (rollouts_per_epoch < 1) return "M (rollouts per epoch) must be >= 1";
  if (rollout_len < 1) return "k (rollout length) must be >= 1";
  if (init_chunk < 1) return "q (initial-state chunk) must be >= 1";
  if (grad_updates < 1) return "G (gradient updates) must be >= 1";
  if (warmup_steps < 0) return "warmup_steps must be >= 0";
  if (eval_every < 1) return "eval_every must be >= 1";
  if (eval_episodes < 1) return "eval_episodes must be >= 1";
  if (sac.batch < 1) return "sac batch must be >= 1";
  const std::string gen_err = sr.generator.validate();
  if (!gen_err.empty()) return "sr: " + gen_err;
  return {};
}

EvalResult evaluate_policy(envs::Env& env, sacrl::SacAgent& agent, int episodes,
                           std::uint64_t seed) {
  if (episodes < 1)
    throw std::invalid_argument("evaluate_policy: episodes must be >= 1");
  std::vector<real> returns;
  returns.reserve(static_cast<std::size_t>(episodes));
  for (int ep = 0; ep < episodes; ++ep) {
    Rng rng = make_rng(seed, 0xeba1 + static_cast<std::uint64_t>(ep));
    VecX obs = env.reset(rng);
    real ret = 0.0;
    while (true) {
      const auto [a, logp] = agent.act(obs, /*deterministic=*/true);
      const envs::StepResult sr = env.step(a);
      ret += sr.reward;
      obs = sr.obs;
      if (sr.done) break;
    }
    returns.push_back(ret);
  }
  EvalResult out;
  for (real r : returns) out.mean += r;
  out.mean /= static_cast<real>(returns.size());
  for (real r : returns) out.stddev += (r - out.mean) * (r - out.mean);
  out.stddev = std::sqrt(out.stddev / static_cast<real>(returns.size()));
  return out;
}

std::vector<VecX> sample_initial_states(const sacrl::ReplayBuffer& buffer, int q,
                                        int count, Rng& rng) {
  if (buffer.empty())
    throw std::runtime_error("sample_initial_states: empty buffer");
  const std::size_t window =
      std::min<std::size_t>(static_cast<std::size_t>(q), buffer.size());
  std::uniform_int_distribution<std::size_t> dist(0, window - 1);
  std::vector<VecX> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(buffer.from_newest(dist(rng)).s);
  return out;
}

namespace {

std::unique_ptr<dynmodel::DynamicsModel> build_model(const RunConfig& cfg,
                                                     const envs::EnvSpec& spec) {
  if (cfg.model_kind == "symbolic")
    return std::make_unique<dynmodel::SymbolicDynamics>(spec.state_dim,
                                                        spec.action_dim, cfg.sr);
  if (cfg.model_kind == "neural")
    return std::make_unique<dynmodel::NeuralDynamics>(spec.state_dim,
                                                      spec.action_dim, cfg.neural);
  if (cfg.model_kind == "oracle") {
    std::vector<expr::ExprTree> exprs;
    for (const std::string& text : envs::pendulum_truth_expressions())
      exprs.push_back(expr::parse(text, spec.state_dim + spec.action_dim));
    return std::make_unique<dynmodel::SymbolicDynamics>(std::move(exprs),
                                                        spec.state_dim,
                                                        spec.action_dim);
  }
  return nullptr;  // model-free
}

}  // namespace

MbpoRun::MbpoRun(const RunConfig& cfg)
    : cfg_(cfg),
      env_(envs::make_env(cfg.env_name)),
      eval_env_(envs::make_env(cfg.env_name)),
      env_buffer_(cfg.env_buffer_capacity, Source::Env),
      model_buffer_(cfg.sac.buffer_capacity, Source::Model),
      reset_rng_(make_rng(cfg.seed, 0x7e5e7)),
      action_rng_(make_rng(cfg.seed, 0xac710)),
      rollout_rng_(make_rng(cfg.seed, 0x70110)),
      batch_rng_(make_rng(cfg.seed, 0xba7c4)) {
  const std::string err = cfg_.validate();
  if (!err.empty()) throw std::invalid_argument("RunConfig: " + err);
  agent_ = std::make_unique<sacrl::SacAgent>(env_->spec(), cfg_.sac, cfg_.seed);
  model_ = build_model(cfg_, env_->spec());
  model_ready_ = cfg_.model_kind == "oracle";
}

void MbpoRun::collect_env_transitions(int n, bool random_actions) {
  const envs::EnvSpec& sp = env_->spec();
  for (int i = 0; i < n; ++i) {
    if (need_reset_) {
      obs_ = env_->reset(reset_rng_);
      need_reset_ = false;
    }
    VecX a(sp.action_dim);
    if (random_actions) {
      for (int j = 0; j < sp.action_dim; ++j)
        a(j) = uniform(action_rng_, sp.action_low(j), sp.action_high(j));
    } else {
      a = agent_->act(obs_, /*deterministic=*/false).first;
    }
    const envs::StepResult sr = env_->step(a);
    Transition tr;
    tr.obs = obs_;
    tr.s = sr.state_before;
    tr.a = a;
    tr.r = sr.reward;
    tr.obs2 = sr.obs;
    tr.s2 = sr.state_after;
    tr.done = false;  // time-limit ends bootstrap as non-terminal
    tr.src = Source::Env;
    env_buffer_.push(std::move(tr));
    obs_ = sr.obs;
    if (sr.done) need_reset_ = true;
    ++env_steps_;
  }
}

void MbpoRun::warmup() {
  if (cfg_.warmup_steps > 0)
    collect_env_transitions(cfg_.warmup_steps, /*random_actions=*/true);
}

EpochMetrics MbpoRun::run_epoch() {
  ++epoch_;
  EpochMetrics m;
  m.epoch = epoch_;

  collect_env_transitions(cfg_.steps_per_epoch, /*random_actions=*/false);
  m.env_steps = env_steps_;

  const bool model_based = model_ != nullptr;
  if (model_based) {
    std::vector<const Transition*> all;
    all.reserve(env_buffer_.size());
    for (std::size_t i = 0; i < env_buffer_.size(); ++i)
      all.push_back(&env_buffer_.at(i));

    if (cfg_.model_kind == "oracle") {
      // Nothing to fit; report prediction error on the most recent window.
      real sum = 0.0;
      const std::size_t window = std::min<std::size_t>(400, all.size());
      for (std::size_t i = 0; i < window; ++i) {
        const Transition& tr = env_buffer_.from_newest(i);
        const VecX pred = model_->predict(tr.s, tr.a);
        sum += (pred - tr.s2).squaredNorm() / static_cast<real>(pred.size());
      }
      m.model_mse.assign(1, sum / static_cast<real>(window));
    } else {
      try {
        const std::uint64_t fit_seed =
            cfg_.seed * 1000003ULL + static_cast<std::uint64_t>(epoch_);
        const dynmodel::FitDiagnostics diag = model_->fit(all, fit_seed);
        m.model_mse = diag.held_out_mse;
        model_ready_ = true;
      } catch (const std::exception& e) {
        // Keep the previous epoch's model alive; rollouts proceed against it.
        m.model_refit_failed = true;
        std::cerr << "model refit failed (epoch " << epoch_ << "): " << e.what()
                  << "\n";
      }
    }

    if (model_ready_) {
      const std::vector<VecX> starts = sample_initial_states(
          env_buffer_, cfg_.init_chunk, cfg_.rollouts_per_epoch, rollout_rng_);
      const dynmodel::Policy pol = [this](const VecX& obs) {
        return agent_->act(obs, /*deterministic=*/false).first;
      };
      for (const VecX& s0 : starts) {
        for (Transition& tr : dynmodel::rollout(*model_, pol, *env_, s0,
                                                cfg_.rollout_len))
          model_buffer_.push(std::move(tr));
      }
    }
    if (const auto* sym = dynamic_cast<const dynmodel::SymbolicDynamics*>(model_.get()))
      m.invalid_fallbacks = sym->invalid_fallbacks();
  }

  // The policy trains exclusively on model-generated data in model-based
  // modes; the model-free baseline trains on env transitions instead.
  const sacrl::ReplayBuffer& train_buffer =
      model_based ? model_buffer_ : env_buffer_;
  if (!train_buffer.empty()) {
    real q1 = 0.0, q2 = 0.0, pol = 0.0;
    for (int g = 0; g < cfg_.grad_updates; ++g) {
      const auto batch = train_buffer.sample(
          static_cast<std::size_t>(cfg_.sac.batch), batch_rng_);
      const sacrl::SacLosses l = agent_->update(batch);
      q1 += l.q1;
      q2 += l.q2;
      pol += l.policy;
      m.alpha = l.alpha;
    }
    m.q1_loss = q1 / cfg_.grad_updates;
    m.q2_loss = q2 / cfg_.grad_updates;
    m.policy_loss = pol / cfg_.grad_updates;
  }

  m.be_size = env_buffer_.size();
  m.bpi_size = model_buffer_.size();
  return m;
}

EvalResult MbpoRun::evaluate(std::uint64_t eval_seed) {
  return evaluate_policy(*eval_env_, *agent_, cfg_.eval_episodes, eval_seed);
}

RunResult run_training(const RunConfig& cfg, const EpochSink& sink) {
  MbpoRun run(cfg);
  run.warmup();
  RunResult out;
  for (int e = 0; e < cfg.epochs; ++e) {
    EpochMetrics m = run.run_epoch();
    if (m.epoch % cfg.eval_every == 0) {
      const EvalResult ev = run.evaluate(
          cfg.seed * 7919ULL + static_cast<std::uint64_t>(m.epoch));
      m.evaluated = true;
      m.eval_return_mean = ev.mean;
      m.eval_return_std = ev.stddev;
    }
    if (sink)
      sink(m, cfg.model_kind == "symbolic" || cfg.model_kind == "oracle"
                  ? run.model()
                  : nullptr);
    const bool stop = cfg.stop_return && m.evaluated &&
                      m.eval_return_mean >= *cfg.stop_return;
    out.metrics.push_back(std::move(m));
    if (stop) {
      out.steps_to_stop = out.metrics.back().env_steps;
      break;
    }
  }
  return out;
}

}  // namespace symdyn::mbpo
