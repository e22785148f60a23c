#pragma once

#include <functional>
#include <vector>

#include "sutra/rng.hpp"
#include "sutra/tensor.hpp"

namespace sutra {

// Gated expert mixture: per token, route to the K highest-scoring experts of
// n and combine their outputs weighted by a softmax over the surviving
// logits. Selection is piecewise constant, so gradients treat it as fixed;
// everything else (gate weights included) is differentiable.

struct MoeConfig {
  int d_model = 0;
  int ffn_dim = 0;
  int n_experts = 0;
  int top_k = 0;
  void validate() const;  // throws ConfigError
};

// Two-projection gated feed-forward expert: w2(silu(x w1) * (x w3)).
struct SwigluExpert {
  Tensor w1, w3;  // d_model x ffn_dim
  Tensor w2;      // ffn_dim x d_model

  static SwigluExpert init(int d_model, int ffn_dim, Rng& rng);
  Tensor forward(const Tensor& rows) const;  // (r, d) -> (r, d)
  std::vector<Tensor> params() const { return {w1, w3, w2}; }
  long long n_params() const;
};

struct GateOutput {
  Tensor logits;   // (rows, n)
  Tensor weights;  // (rows, n), exact zeros outside the selection
  std::vector<std::vector<int>> selected;  // per row, ascending expert index
};

class MoeLayer {
 public:
  MoeLayer() = default;
  MoeLayer(const MoeConfig& cfg, Rng& rng);

  // x: (rows, d_model). Returns per-row gate weights with exactly K nonzeros.
  GateOutput gate(const Tensor& x) const;

  // Sparse combination over (rows, d_model); only selected experts run.
  Tensor forward_rows(const Tensor& x) const;
  // Convenience over (batch, seq, d_model).
  Tensor forward(const Tensor& x) const;

  const MoeConfig& config() const { return cfg_; }
  const Tensor& gate_weights() const { return wg_; }
  const std::vector<SwigluExpert>& experts() const { return experts_; }
  std::vector<Tensor> params() const;

  // total vs per-token-active parameter counts
  std::pair<long long, long long> count_params() const;

  // routing counters since construction / last reset (observability only)
  const std::vector<long long>& use_counts() const { return use_counts_; }
  void reset_use_counts();

 private:
  MoeConfig cfg_;
  Tensor wg_;  // d_model x n_experts
  std::vector<SwigluExpert> experts_;
  mutable std::vector<long long> use_counts_;
};

}  // namespace sutra
