#include "symdyn/sac.hpp"

#include <cmath>
#include <stdexcept>

namespace symdyn::sacrl {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::optional<Source> expected)
    : capacity_(capacity), expected_(expected) {
  if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
  data_.resize(capacity_);
}

void ReplayBuffer::push(Transition t) {
  if (expected_ && t.src != *expected_)
    throw std::invalid_argument("ReplayBuffer: transition source tag mismatch");
  data_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
  if (count_ < capacity_) ++count_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= count_) throw std::out_of_range("ReplayBuffer::at");
  const std::size_t oldest = (head_ + capacity_ - count_) % capacity_;
  return data_[(oldest + i) % capacity_];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (count_ == 0) throw std::runtime_error("ReplayBuffer: sampling from empty buffer");
  std::vector<const Transition*> out;
  out.reserve(n);
  std::uniform_int_distribution<std::size_t> dist(0, count_ - 1);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&at(dist(rng)));
  return out;
}

namespace {

constexpr real kLogSqrt2Pi = 0.9189385332046727;  // log(sqrt(2*pi))

inline real softplus(real x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

// log(1 - tanh(x)^2), stable for large |x|.
inline real log1m_tanh_sq(real x) {
  return 2.0 * (std::log(2.0) - x - softplus(-2.0 * x));
}

// tanh held a hair inside (-1, 1): actions must stay strictly inside the
// bounds even when the pre-squash value saturates in double precision.
inline real squash(real x) {
  return std::clamp(std::tanh(x), -1.0 + 1e-12, 1.0 - 1e-12);
}

std::vector<int> mlp_sizes(int in, int hidden, int depth, int out) {
  std::vector<int> sizes{in};
  for (int i = 0; i < depth; ++i) sizes.push_back(hidden);
  sizes.push_back(out);
  return sizes;
}

}  // namespace

SacAgent::SacAgent(const envs::EnvSpec& spec, const SacConfig& cfg,
                   std::uint64_t seed)
    : cfg_(cfg),
      obs_dim_(spec.obs_dim),
      act_dim_(spec.action_dim),
      act_center_((spec.action_high + spec.action_low) / 2.0),
      act_scale_((spec.action_high - spec.action_low) / 2.0),
      target_entropy_(-static_cast<real>(spec.action_dim)),
      log_alpha_(std::log(cfg.init_alpha)),
      alpha_opt_(cfg.lr),
      rng_(make_rng(seed, 0x5ac)) {
  Rng init = make_rng(seed, 0x1417);
  policy_ = nnet::Mlp(mlp_sizes(obs_dim_, cfg.hidden, cfg.depth, 2 * act_dim_), init);
  q1_ = nnet::Mlp(mlp_sizes(obs_dim_ + act_dim_, cfg.hidden, cfg.depth, 1), init);
  q2_ = nnet::Mlp(mlp_sizes(obs_dim_ + act_dim_, cfg.hidden, cfg.depth, 1), init);
  q1t_ = q1_;
  q2t_ = q2_;
  policy_opt_ = nnet::Adam(policy_, cfg.lr);
  q1_opt_ = nnet::Adam(q1_, cfg.lr);
  q2_opt_ = nnet::Adam(q2_, cfg.lr);
}

SacAgent::PolicySample SacAgent::sample_policy(const MatX& obs,
                                               nnet::Mlp::Tape* tape) {
  nnet::Mlp::Tape local;
  const MatX heads = tape ? policy_.forward(obs, *tape) : policy_.forward(obs, local);
  const Eigen::Index B = obs.rows();

  PolicySample ps;
  ps.xi.resize(B, act_dim_);
  ps.sigma.resize(B, act_dim_);
  ps.tanh_raw.resize(B, act_dim_);
  ps.clamp_mask.resize(B, act_dim_);
  ps.action.resize(B, act_dim_);
  ps.logp = VecX::Zero(B);

  std::normal_distribution<real> gauss(0.0, 1.0);
  for (Eigen::Index r = 0; r < B; ++r) {
    for (int j = 0; j < act_dim_; ++j) {
      const real mu = heads(r, j);
      const real s_raw = heads(r, act_dim_ + j);
      const real s = std::clamp(s_raw, cfg_.log_std_min, cfg_.log_std_max);
      ps.clamp_mask(r, j) = (s_raw > cfg_.log_std_min && s_raw < cfg_.log_std_max) ? 1.0 : 0.0;
      const real sigma = std::exp(s);
      const real xi = gauss(rng_);
      const real raw = mu + sigma * xi;
      const real t = squash(raw);
      ps.xi(r, j) = xi;
      ps.sigma(r, j) = sigma;
      ps.tanh_raw(r, j) = t;
      ps.action(r, j) = act_center_(j) + act_scale_(j) * t;
      ps.logp(r) += -kLogSqrt2Pi - s - 0.5 * xi * xi -
                    std::log(act_scale_(j)) - log1m_tanh_sq(raw);
    }
  }
  return ps;
}

std::pair<VecX, real> SacAgent::act(const VecX& obs, bool deterministic) {
  if (obs.size() != obs_dim_)
    throw std::invalid_argument("SacAgent::act: observation dimension mismatch");
  if (deterministic) {
    const VecX heads = policy_.forward(obs);
    VecX a(act_dim_);
    for (int j = 0; j < act_dim_; ++j)
      a(j) = act_center_(j) + act_scale_(j) * squash(heads(j));
    return {a, 0.0};
  }
  PolicySample ps = sample_policy(obs.transpose(), nullptr);
  return {ps.action.row(0).transpose(), ps.logp(0)};
}

real SacAgent::q_value(const VecX& obs, const VecX& action) const {
  VecX in(obs_dim_ + act_dim_);
  in << obs, action;
  return q1_.forward(in)(0);
}

SacLosses SacAgent::update(const std::vector<const Transition*>& batch) {
  if (batch.empty()) throw std::invalid_argument("SacAgent::update: empty batch");
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());

  MatX O(B, obs_dim_), A(B, act_dim_), O2(B, obs_dim_);
  VecX R(B), D(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const Transition& tr = *batch[static_cast<std::size_t>(i)];
    O.row(i) = tr.obs.transpose();
    A.row(i) = tr.a.transpose();
    O2.row(i) = tr.obs2.transpose();
    R(i) = tr.r;
    D(i) = tr.done ? 1.0 : 0.0;
  }

  const real alpha = std::exp(log_alpha_);
  SacLosses losses;
  losses.alpha = alpha;

  // Critic targets from the frozen nets and a fresh next action.
  VecX target(B);
  {
    PolicySample next = sample_policy(O2, nullptr);
    MatX in2(B, obs_dim_ + act_dim_);
    in2 << O2, next.action;
    const VecX y1 = q1t_.forward(in2);
    const VecX y2 = q2t_.forward(in2);
    for (Eigen::Index i = 0; i < B; ++i)
      target(i) = critic_target(R(i), cfg_.gamma, D(i) > 0.5,
                                std::min(y1(i), y2(i)), alpha, next.logp(i));
  }

  // One squared-error step per critic.
  MatX in(B, obs_dim_ + act_dim_);
  in << O, A;
  const real inv_b = 1.0 / static_cast<real>(B);
  {
    nnet::Mlp::Tape tape;
    const VecX q = q1_.forward(in, tape);
    losses.q1 = (q - target).squaredNorm() * inv_b;
    const MatX dq = 2.0 * inv_b * (q - target);
    q1_opt_.step(q1_, q1_.backward(tape, dq));
  }
  {
    nnet::Mlp::Tape tape;
    const VecX q = q2_.forward(in, tape);
    losses.q2 = (q - target).squaredNorm() * inv_b;
    const MatX dq = 2.0 * inv_b * (q - target);
    q2_opt_.step(q2_, q2_.backward(tape, dq));
  }

  // Policy step: maximize min-Q of a reparameterized action minus entropy
  // cost. The Q gradient flows through the action input only; critic
  // parameters are left untouched.
  {
    nnet::Mlp::Tape ptape;
    PolicySample ps = sample_policy(O, &ptape);
    MatX pin(B, obs_dim_ + act_dim_);
    pin << O, ps.action;

    nnet::Mlp::Tape t1, t2;
    const VecX v1 = q1_.forward(pin, t1);
    const VecX v2 = q2_.forward(pin, t2);

    VecX minq(B);
    MatX m1 = MatX::Zero(B, 1), m2 = MatX::Zero(B, 1);
    for (Eigen::Index i = 0; i < B; ++i) {
      if (v1(i) <= v2(i)) {
        minq(i) = v1(i);
        m1(i, 0) = 1.0;
      } else {
        minq(i) = v2(i);
        m2(i, 0) = 1.0;
      }
    }
    losses.policy = (alpha * ps.logp - minq).mean();
    losses.entropy = -ps.logp.mean();

    const MatX g1 = q1_.backward(t1, m1).input;
    const MatX g2 = q2_.backward(t2, m2).input;
    const MatX qgrad = g1.rightCols(act_dim_) + g2.rightCols(act_dim_);

    MatX dheads = MatX::Zero(B, 2 * act_dim_);
    for (Eigen::Index i = 0; i < B; ++i) {
      for (int j = 0; j < act_dim_; ++j) {
        const real t = ps.tanh_raw(i, j);
        const real dsquash = act_scale_(j) * (1.0 - t * t);
        const real da = -qgrad(i, j) * inv_b;  // d policy-loss / d action
        const real dlogp_dmu = 2.0 * t;
        const real draw_ds = ps.sigma(i, j) * ps.xi(i, j);
        dheads(i, j) = alpha * inv_b * dlogp_dmu + da * dsquash;
        dheads(i, act_dim_ + j) =
            (alpha * inv_b * (-1.0 + dlogp_dmu * draw_ds) + da * dsquash * draw_ds) *
            ps.clamp_mask(i, j);
      }
    }
    policy_opt_.step(policy_, policy_.backward(ptape, dheads));

    // Temperature step toward the entropy target.
    const real err = ps.logp.mean() + target_entropy_;
    losses.alpha_loss = -log_alpha_ * err;
    log_alpha_ = alpha_opt_.step(log_alpha_, -err);
  }

  nnet::Mlp::soft_update(q1t_, q1_, cfg_.tau);
  nnet::Mlp::soft_update(q2t_, q2_, cfg_.tau);
  return losses;
}

}  // namespace symdyn::sacrl
