#include "symdyn/nnet.hpp"

#include <cmath>
#include <stdexcept>

namespace symdyn::nnet {

Mlp::Mlp(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least two sizes");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    const real bound = std::sqrt(6.0 / static_cast<real>(in));
    MatX w(in, out);
    for (Eigen::Index i = 0; i < w.size(); ++i)
      w.data()[i] = uniform(rng, -bound, bound);
    w_.push_back(std::move(w));
    b_.push_back(VecX::Zero(out));
  }
}

int Mlp::input_size() const { return static_cast<int>(w_.front().rows()); }
int Mlp::output_size() const { return static_cast<int>(w_.back().cols()); }

MatX Mlp::forward(const MatX& x, Tape& tape) const {
  if (x.cols() != w_.front().rows())
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  tape.input = x;
  tape.pre.clear();
  tape.post.clear();
  MatX h = x;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    MatX z = (h * w_[l]).rowwise() + b_[l].transpose();
    tape.pre.push_back(z);
    if (l + 1 < w_.size()) {
      h = z.cwiseMax(0.0);
      tape.post.push_back(h);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

MatX Mlp::forward(const MatX& x) const {
  if (x.cols() != w_.front().rows())
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  MatX h = x;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    h = (h * w_[l]).rowwise() + b_[l].transpose();
    if (l + 1 < w_.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

VecX Mlp::forward(const VecX& x) const {
  MatX row = x.transpose();
  MatX y = forward(row);
  return y.row(0).transpose();
}

Mlp::Grads Mlp::backward(const Tape& tape, const MatX& dy) const {
  if (tape.pre.size() != w_.size())
    throw std::invalid_argument("Mlp::backward: tape does not match this net");
  Grads g;
  g.w.resize(w_.size());
  g.b.resize(w_.size());
  MatX delta = dy;  // dL/dz for the current layer
  for (std::size_t l = w_.size(); l-- > 0;) {
    if (l + 1 < w_.size()) {
      // Pass through the rectifier of layer l (delta currently holds dL/dh).
      delta = (tape.pre[l].array() > 0.0).select(delta, 0.0);
    }
    const MatX& input = l == 0 ? tape.input : tape.post[l - 1];
    g.w[l] = input.transpose() * delta;
    g.b[l] = delta.colwise().sum().transpose();
    if (l > 0)
      delta = delta * w_[l].transpose();
    else
      g.input = delta * w_[0].transpose();
  }
  return g;
}

void Mlp::soft_update(Mlp& target, const Mlp& source, real tau) {
  for (std::size_t l = 0; l < target.w_.size(); ++l) {
    target.w_[l] = (1.0 - tau) * target.w_[l] + tau * source.w_[l];
    target.b_[l] = (1.0 - tau) * target.b_[l] + tau * source.b_[l];
  }
}

Adam::Adam(const Mlp& net, real lr, real beta1, real beta2, real eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const MatX& w : net.weights()) {
    mw_.push_back(MatX::Zero(w.rows(), w.cols()));
    vw_.push_back(MatX::Zero(w.rows(), w.cols()));
  }
  for (const VecX& b : net.biases()) {
    mb_.push_back(VecX::Zero(b.size()));
    vb_.push_back(VecX::Zero(b.size()));
  }
}

void Adam::step(Mlp& net, const Mlp::Grads& grads) {
  ++t_;
  const real c1 = 1.0 - std::pow(beta1_, static_cast<real>(t_));
  const real c2 = 1.0 - std::pow(beta2_, static_cast<real>(t_));
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    mw_[l] = beta1_ * mw_[l] + (1.0 - beta1_) * grads.w[l];
    vw_[l] = beta2_ * vw_[l].array().matrix() +
             (1.0 - beta2_) * grads.w[l].array().square().matrix();
    net.weights()[l].array() -=
        lr_ * (mw_[l].array() / c1) / ((vw_[l].array() / c2).sqrt() + eps_);

    mb_[l] = beta1_ * mb_[l] + (1.0 - beta1_) * grads.b[l];
    vb_[l] = beta2_ * vb_[l].array().matrix() +
             (1.0 - beta2_) * grads.b[l].array().square().matrix();
    net.biases()[l].array() -=
        lr_ * (mb_[l].array() / c1) / ((vb_[l].array() / c2).sqrt() + eps_);
  }
}

real ScalarAdam::step(real param, real grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad * grad;
  const real mhat = m_ / (1.0 - std::pow(beta1_, static_cast<real>(t_)));
  const real vhat = v_ / (1.0 - std::pow(beta2_, static_cast<real>(t_)));
  return param - lr_ * mhat / (std::sqrt(vhat) + eps_);
}

}  // namespace symdyn::nnet
