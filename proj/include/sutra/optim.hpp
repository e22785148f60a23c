#pragma once

#include <vector>

#include "sutra/tensor.hpp"

namespace sutra {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed parameter list. Parameters whose
// grad is still unset at step() time are treated as zero-grad.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long long step_count() const { return t_; }

  void step();
  void zero_grad();

  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Global L2-norm clip across all grads; returns the pre-clip norm.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

}  // namespace sutra
