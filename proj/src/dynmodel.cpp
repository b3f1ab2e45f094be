#include "symdyn/dynmodel.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "symdyn/dataio.hpp"
#include "symdyn/fit.hpp"

namespace symdyn::dynmodel {

using fitopt::Dataset;

SymbolicDynamics::SymbolicDynamics(int state_dim, int action_dim,
                                   SymbolicModelConfig cfg)
    : state_dim_(state_dim), action_dim_(action_dim), cfg_(std::move(cfg)) {}

SymbolicDynamics::SymbolicDynamics(std::vector<expr::ExprTree> exprs,
                                   int state_dim, int action_dim)
    : state_dim_(state_dim), action_dim_(action_dim), exprs_(std::move(exprs)) {
  if (static_cast<int>(exprs_.size()) != state_dim_)
    throw std::invalid_argument("SymbolicDynamics: need one expression per state coordinate");
  for (const auto& t : exprs_) {
    const std::string err = expr::validate(t, state_dim_ + action_dim_, 1 << 16);
    if (!err.empty())
      throw std::invalid_argument("SymbolicDynamics: invalid expression: " + err);
  }
}

VecX SymbolicDynamics::predict(const VecX& s, const VecX& a) const {
  if (s.size() != state_dim_ || a.size() != action_dim_)
    throw std::invalid_argument("SymbolicDynamics::predict: dimension mismatch");
  if (exprs_.empty())
    throw std::runtime_error("SymbolicDynamics::predict: model has not been fitted");
  std::vector<real> in(static_cast<std::size_t>(state_dim_ + action_dim_));
  for (int i = 0; i < state_dim_; ++i) in[static_cast<std::size_t>(i)] = s(i);
  for (int i = 0; i < action_dim_; ++i)
    in[static_cast<std::size_t>(state_dim_ + i)] = a(i);

  VecX out(state_dim_);
  std::vector<real> scratch;
  for (int i = 0; i < state_dim_; ++i) {
    const auto v = expr::evaluate(exprs_[static_cast<std::size_t>(i)], in, scratch);
    if (v) {
      out(i) = *v;
    } else {
      out(i) = s(i);  // identity hold
      ++fallbacks_;
    }
  }
  return out;
}

namespace {

Dataset dataset_for_coordinate(const std::vector<const Transition*>& transitions,
                               int coord, int state_dim, int action_dim) {
  Dataset d;
  const Eigen::Index n = static_cast<Eigen::Index>(transitions.size());
  d.X.resize(n, state_dim + action_dim);
  d.y.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Transition& tr = *transitions[static_cast<std::size_t>(r)];
    d.X.row(r).head(state_dim) = tr.s.transpose();
    d.X.row(r).tail(action_dim) = tr.a.transpose();
    d.y(r) = tr.s2(coord);
  }
  return d;
}

}  // namespace

FitDiagnostics SymbolicDynamics::fit(
    const std::vector<const Transition*>& transitions, std::uint64_t seed) {
  if (transitions.size() < 20)
    throw std::invalid_argument("SymbolicDynamics::fit: need at least 20 transitions, got " +
                                std::to_string(transitions.size()));
  FitDiagnostics diag;
  std::vector<expr::ExprTree> fitted;
  for (int coord = 0; coord < state_dim_; ++coord) {
    Dataset full = dataset_for_coordinate(transitions, coord, state_dim_, action_dim_);
    Rng sub_rng = make_rng(seed + static_cast<std::uint64_t>(coord), 0x5ab5a);
    Dataset data = srgen::subsample(full, cfg_.subsample, sub_rng);

    srgen::GeneratorConfig gcfg = cfg_.generator;
    gcfg.seed = seed + static_cast<std::uint64_t>(coord);
    srgen::GpGenerator gen(gcfg);
    srgen::DimensionFit fit = srgen::fit_dimension(data, gen, gcfg);
    diag.held_out_mse.push_back(fit.report.mse);
    diag.held_out_r2.push_back(fit.report.r2);
    fitted.push_back(fit.tree);
    diag.dimension_fits.push_back(std::move(fit));
  }
  exprs_ = std::move(fitted);
  return diag;
}

void SymbolicDynamics::save(const std::string& path,
                            const envs::EnvSpec& spec) const {
  std::string out;
  for (int i = 0; i < state_dim_; ++i) {
    out += spec.state_names[static_cast<std::size_t>(i)];
    out += '\t';
    out += expr::to_string(exprs_[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  dataio::atomic_write(path, out);
}

SymbolicDynamics SymbolicDynamics::load(const std::string& path,
                                        const envs::EnvSpec& spec) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  std::vector<expr::ExprTree> exprs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error(path + ": expected '<coord>\\t<expression>' lines");
    exprs.push_back(expr::parse(line.substr(tab + 1),
                                spec.state_dim + spec.action_dim));
  }
  return SymbolicDynamics(std::move(exprs), spec.state_dim, spec.action_dim);
}

NeuralDynamics::NeuralDynamics(int state_dim, int action_dim,
                               NeuralModelConfig cfg)
    : state_dim_(state_dim), action_dim_(action_dim), cfg_(std::move(cfg)) {}

VecX NeuralDynamics::predict(const VecX& s, const VecX& a) const {
  if (s.size() != state_dim_ || a.size() != action_dim_)
    throw std::invalid_argument("NeuralDynamics::predict: dimension mismatch");
  if (!fitted_)
    throw std::runtime_error("NeuralDynamics::predict: model has not been fitted");
  VecX in(state_dim_ + action_dim_);
  in << s, a;
  const VecX norm = (in - in_mean_).cwiseQuotient(in_std_);
  const VecX delta_norm = net_.forward(norm);
  VecX out = s + (delta_norm.cwiseProduct(out_std_) + out_mean_);
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (!std::isfinite(out(i))) out(i) = s(i);
  return out;
}

FitDiagnostics NeuralDynamics::fit(
    const std::vector<const Transition*>& transitions, std::uint64_t seed) {
  if (transitions.size() < 20)
    throw std::invalid_argument("NeuralDynamics::fit: need at least 20 transitions");
  const Eigen::Index n = static_cast<Eigen::Index>(transitions.size());
  const int in_dim = state_dim_ + action_dim_;
  MatX X(n, in_dim), Y(n, state_dim_);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Transition& tr = *transitions[static_cast<std::size_t>(r)];
    X.row(r).head(state_dim_) = tr.s.transpose();
    X.row(r).tail(action_dim_) = tr.a.transpose();
    Y.row(r) = (tr.s2 - tr.s).transpose();
  }

  Rng rng = make_rng(seed, 0xd1f);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const Eigen::Index n_held = std::max<Eigen::Index>(1, n / 5);
  const Eigen::Index n_train = n - n_held;

  in_mean_ = VecX::Zero(in_dim);
  out_mean_ = VecX::Zero(state_dim_);
  for (Eigen::Index r = 0; r < n_train; ++r) {
    in_mean_ += X.row(idx[static_cast<std::size_t>(r)]).transpose();
    out_mean_ += Y.row(idx[static_cast<std::size_t>(r)]).transpose();
  }
  in_mean_ /= static_cast<real>(n_train);
  out_mean_ /= static_cast<real>(n_train);
  in_std_ = VecX::Zero(in_dim);
  out_std_ = VecX::Zero(state_dim_);
  for (Eigen::Index r = 0; r < n_train; ++r) {
    in_std_ += (X.row(idx[static_cast<std::size_t>(r)]).transpose() - in_mean_)
                   .array().square().matrix();
    out_std_ += (Y.row(idx[static_cast<std::size_t>(r)]).transpose() - out_mean_)
                    .array().square().matrix();
  }
  in_std_ = (in_std_ / static_cast<real>(n_train)).cwiseSqrt().cwiseMax(1e-8);
  out_std_ = (out_std_ / static_cast<real>(n_train)).cwiseSqrt().cwiseMax(1e-8);

  net_ = nnet::Mlp({in_dim, cfg_.hidden, state_dim_}, rng);
  nnet::Adam opt(net_, cfg_.lr);

  const int batch = std::min<int>(cfg_.batch, static_cast<int>(n_train));
  std::uniform_int_distribution<Eigen::Index> pick(0, n_train - 1);
  const long total_steps =
      static_cast<long>(cfg_.epochs_over_data) * n_train / std::max(1, batch);
  MatX bx(batch, in_dim), by(batch, state_dim_);
  for (long step = 0; step < total_steps; ++step) {
    for (int i = 0; i < batch; ++i) {
      const Eigen::Index r = idx[static_cast<std::size_t>(pick(rng))];
      bx.row(i) = (X.row(r).transpose() - in_mean_).cwiseQuotient(in_std_).transpose();
      by.row(i) = (Y.row(r).transpose() - out_mean_).cwiseQuotient(out_std_).transpose();
    }
    nnet::Mlp::Tape tape;
    const MatX pred = net_.forward(bx, tape);
    const MatX err = pred - by;
    opt.step(net_, net_.backward(tape, 2.0 * err / static_cast<real>(batch)));
  }
  fitted_ = true;

  FitDiagnostics diag;
  diag.held_out_mse.assign(static_cast<std::size_t>(state_dim_), 0.0);
  diag.held_out_r2.assign(static_cast<std::size_t>(state_dim_), 0.0);
  VecX mean_y = VecX::Zero(state_dim_), ss_tot = VecX::Zero(state_dim_);
  for (Eigen::Index r = 0; r < n_held; ++r)
    mean_y += Y.row(idx[static_cast<std::size_t>(n_train + r)]).transpose();
  mean_y /= static_cast<real>(n_held);
  for (Eigen::Index r = 0; r < n_held; ++r) {
    const Eigen::Index row = idx[static_cast<std::size_t>(n_train + r)];
    const VecX s = X.row(row).head(state_dim_).transpose();
    const VecX a = X.row(row).tail(action_dim_).transpose();
    const VecX pred_delta = predict(s, a) - s;
    const VecX err = pred_delta - Y.row(row).transpose();
    for (int c = 0; c < state_dim_; ++c) {
      diag.held_out_mse[static_cast<std::size_t>(c)] += err(c) * err(c);
      const real d = Y(row, c) - mean_y(c);
      ss_tot(c) += d * d;
    }
  }
  for (int c = 0; c < state_dim_; ++c) {
    const real ss_res = diag.held_out_mse[static_cast<std::size_t>(c)];
    diag.held_out_mse[static_cast<std::size_t>(c)] = ss_res / static_cast<real>(n_held);
    diag.held_out_r2[static_cast<std::size_t>(c)] =
        ss_tot(c) > 0.0 ? 1.0 - ss_res / ss_tot(c) : 0.0;
  }
  return diag;
}

std::vector<Transition> rollout(const DynamicsModel& model, const Policy& policy,
                                const envs::Env& env, const VecX& s0, int k) {
  if (k < 1) throw std::invalid_argument("rollout: k must be >= 1");
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(k));
  VecX s = s0;
  for (int t = 0; t < k; ++t) {
    Transition tr;
    tr.s = s;
    tr.obs = env.state_to_obs(s);
    tr.a = policy(tr.obs);
    tr.s2 = model.predict(s, tr.a);
    tr.obs2 = env.state_to_obs(tr.s2);
    tr.r = env.reward(tr.s, tr.a, tr.s2);
    tr.done = false;  // models never terminate
    tr.src = Source::Model;
    s = tr.s2;
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<real> horizon_mse(const DynamicsModel& model, envs::Env& env,
                              const std::vector<VecX>& start_states,
                              const Policy& policy, int h) {
  if (h < 1) throw std::invalid_argument("horizon_mse: h must be >= 1");
  if (start_states.empty())
    throw std::invalid_argument("horizon_mse: need at least one start state");
  std::vector<real> acc(static_cast<std::size_t>(h), 0.0);
  for (const VecX& s0 : start_states) {
    env.set_state(s0);
    VecX true_s = env.state();
    VecX model_s = true_s;
    for (int t = 0; t < h; ++t) {
      const VecX a = policy(env.state_to_obs(true_s));
      const envs::StepResult sr = env.step(a);
      true_s = env.state();
      model_s = model.predict(model_s, a);
      // Compare against the env's pre-wrap state so angle wraps cannot
      // masquerade as model error; residuals wrap angle coordinates anyway.
      acc[static_cast<std::size_t>(t)] +=
          envs::state_sq_error(env.spec(), model_s, sr.state_after);
    }
  }
  for (real& v : acc) v /= static_cast<real>(start_states.size());
  return acc;
}

}  // namespace symdyn::dynmodel
