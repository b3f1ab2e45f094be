#pragma once

#include <vector>

#include "symdyn/types.hpp"

namespace symdyn::nnet {

// Dense feedforward net: rectifier hidden layers, identity output, 64-bit
// floats throughout. Batches are row-major (one sample per row).
class Mlp {
 public:
  Mlp() = default;
  // `sizes` = {in, hidden..., out}. He-style uniform fan-in init.
  Mlp(const std::vector<int>& sizes, Rng& rng);

  struct Tape {
    MatX input;                 // batch that produced this tape
    std::vector<MatX> pre;     // pre-activations per layer
    std::vector<MatX> post;    // activations per layer (excluding output)
  };

  struct Grads {
    std::vector<MatX> w;
    std::vector<VecX> b;
    MatX input;                 // dL/dX
  };

  MatX forward(const MatX& x, Tape& tape) const;
  MatX forward(const MatX& x) const;  // no tape
  VecX forward(const VecX& x) const;

  // Exact reverse-mode gradients of the forward pass recorded in `tape`.
  Grads backward(const Tape& tape, const MatX& dloss_dy) const;

  int input_size() const;
  int output_size() const;
  std::size_t layer_count() const { return w_.size(); }

  std::vector<MatX>& weights() { return w_; }
  std::vector<VecX>& biases() { return b_; }
  const std::vector<MatX>& weights() const { return w_; }
  const std::vector<VecX>& biases() const { return b_; }

  // target <- (1 - tau) * target + tau * source
  static void soft_update(Mlp& target, const Mlp& source, real tau);

 private:
  std::vector<MatX> w_;  // w_[l] is (in x out)
  std::vector<VecX> b_;
};

// Bias-corrected adaptive-moment optimizer over one Mlp's parameters.
class Adam {
 public:
  Adam() = default;
  explicit Adam(const Mlp& net, real lr = 3e-4, real beta1 = 0.9,
                real beta2 = 0.999, real eps = 1e-8);
  void step(Mlp& net, const Mlp::Grads& grads);
  long steps_taken() const { return t_; }

 private:
  real lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<MatX> mw_, vw_;
  std::vector<VecX> mb_, vb_;
};

// Scalar Adam, used for the entropy temperature.
class ScalarAdam {
 public:
  explicit ScalarAdam(real lr = 3e-4, real beta1 = 0.9, real beta2 = 0.999,
                      real eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  real step(real param, real grad);

 private:
  real lr_, beta1_, beta2_, eps_;
  real m_ = 0.0, v_ = 0.0;
  long t_ = 0;
};

}  // namespace symdyn::nnet
