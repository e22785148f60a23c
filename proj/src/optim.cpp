#include "sutra/optim.hpp"

#include <cmath>

#include "sutra/errors.hpp"

namespace sutra {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (cfg_.lr < 0.0 || cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 ||
      cfg_.beta2 >= 1.0 || cfg_.eps <= 0.0)
    throw ConfigError("adam: bad hyperparameters");
  for (const Tensor& p : params_) {
    if (!p.defined() || !p.is_leaf() || !p.requires_grad())
      throw StateError("adam: parameters must be trainable leaves");
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi];
    const std::vector<double>* g = p.grad();
    for (size_t i = 0; i < p.numel(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      m_[pi][i] = cfg_.beta1 * m_[pi][i] + (1.0 - cfg_.beta1) * gi;
      v_[pi][i] = cfg_.beta2 * v_[pi][i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m_[pi][i] / bc1;
      const double vhat = v_[pi][i] / bc2;
      p.data()[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  if (max_norm <= 0.0) throw ConfigError("clip_grad_norm: max_norm must be positive");
  double sq = 0.0;
  for (const Tensor& p : params) {
    const std::vector<double>* g = p.grad();
    if (!g) continue;
    for (double v : *g) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (Tensor p : params) {
      std::vector<double>* g = p.grad();
      if (!g) continue;
      for (double& v : *g) v *= s;
    }
  }
  return norm;
}

}  // namespace sutra
