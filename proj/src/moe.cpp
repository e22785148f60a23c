#include "sutra/moe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sutra/errors.hpp"
#include "sutra/ops.hpp"

namespace sutra {

void MoeConfig::validate() const {
  if (d_model <= 0 || ffn_dim <= 0) throw ConfigError("moe: non-positive dimensions");
  if (n_experts <= 0) throw ConfigError("moe: need at least one expert");
  if (top_k < 1 || top_k > n_experts)
    throw ConfigError("moe: top_k " + std::to_string(top_k) + " outside [1," +
                      std::to_string(n_experts) + "]");
}

SwigluExpert SwigluExpert::init(int d_model, int ffn_dim, Rng& rng) {
  SwigluExpert e;
  e.w1 = Tensor::randn({d_model, ffn_dim}, rng, 1.0 / std::sqrt(d_model), true);
  e.w3 = Tensor::randn({d_model, ffn_dim}, rng, 1.0 / std::sqrt(d_model), true);
  e.w2 = Tensor::randn({ffn_dim, d_model}, rng, 1.0 / std::sqrt(ffn_dim), true);
  return e;
}

Tensor SwigluExpert::forward(const Tensor& rows) const {
  return matmul(mul(silu(matmul(rows, w1)), matmul(rows, w3)), w2);
}

long long SwigluExpert::n_params() const {
  return static_cast<long long>(w1.numel() + w3.numel() + w2.numel());
}

MoeLayer::MoeLayer(const MoeConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  wg_ = Tensor::randn({cfg_.d_model, cfg_.n_experts}, rng, 1.0 / std::sqrt(cfg_.d_model), true);
  for (int e = 0; e < cfg_.n_experts; ++e)
    experts_.push_back(SwigluExpert::init(cfg_.d_model, cfg_.ffn_dim, rng));
  use_counts_.assign(static_cast<size_t>(cfg_.n_experts), 0);
}

GateOutput MoeLayer::gate(const Tensor& x) const {
  if (x.ndim() != 2 || x.dim(1) != cfg_.d_model)
    throw ShapeError("moe gate: input " + shape_str(x.shape()) + " vs d_model " +
                     std::to_string(cfg_.d_model));
  check_finite(x, "moe gate input");
  const int R = x.dim(0), n = cfg_.n_experts, K = cfg_.top_k;

  GateOutput out;
  out.logits = matmul(x, wg_);

  // Top-K selection per row: highest logit wins, ties to the lower index.
  // The surviving mask is a constant as far as gradients are concerned.
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> mask(static_cast<size_t>(R) * n, ninf);
  out.selected.resize(static_cast<size_t>(R));
  for (int r = 0; r < R; ++r) {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return out.logits[static_cast<size_t>(r) * n + a] >
             out.logits[static_cast<size_t>(r) * n + b];
    });
    order.resize(static_cast<size_t>(K));
    std::sort(order.begin(), order.end());
    out.selected[static_cast<size_t>(r)] = order;
    for (int e : order) mask[static_cast<size_t>(r) * n + e] = 0.0;
  }
  out.weights = softmax(add(out.logits, Tensor::from_vector({R, n}, std::move(mask))), 1);
  return out;
}

Tensor MoeLayer::forward_rows(const Tensor& x) const {
  GateOutput g = gate(x);
  const int R = x.dim(0), n = cfg_.n_experts;

  // rows routed to each expert
  std::vector<std::vector<int>> routed(static_cast<size_t>(n));
  for (int r = 0; r < R; ++r)
    for (int e : g.selected[static_cast<size_t>(r)]) {
      routed[static_cast<size_t>(e)].push_back(r);
      use_counts_[static_cast<size_t>(e)] += 1;
    }

  // weights laid flat so per-(row,expert) scalars can be gathered
  Tensor flat_w = reshape(g.weights, {R * n, 1});
  Tensor acc;
  for (int e = 0; e < n; ++e) {
    const std::vector<int>& rows = routed[static_cast<size_t>(e)];
    if (rows.empty()) continue;  // unselected experts never run
    Tensor xe = gather_rows(x, rows);
    Tensor ye = experts_[static_cast<size_t>(e)].forward(xe);
    if (!ye.all_finite()) {
      for (size_t i = 0; i < rows.size(); ++i)
        for (int d = 0; d < cfg_.d_model; ++d)
          if (!std::isfinite(ye[i * static_cast<size_t>(cfg_.d_model) + d]))
            throw NumericError("moe forward: non-finite output at token " +
                               std::to_string(rows[i]) + " from expert " + std::to_string(e));
    }
    std::vector<int> w_idx;
    w_idx.reserve(rows.size());
    for (int r : rows) w_idx.push_back(r * n + e);
    Tensor we = reshape(gather_rows(flat_w, w_idx), {static_cast<int>(rows.size())});
    Tensor contrib = scatter_rows(R, rows, scale_rows(ye, we));
    acc = acc.defined() ? add(acc, contrib) : contrib;
  }
  return acc;
}

Tensor MoeLayer::forward(const Tensor& x) const {
  if (x.ndim() != 3 || x.dim(2) != cfg_.d_model)
    throw ShapeError("moe forward: input " + shape_str(x.shape()) + " vs d_model " +
                     std::to_string(cfg_.d_model));
  const int B = x.dim(0), T = x.dim(1);
  return reshape(forward_rows(reshape(x, {B * T, cfg_.d_model})), {B, T, cfg_.d_model});
}

std::vector<Tensor> MoeLayer::params() const {
  std::vector<Tensor> out = {wg_};
  for (const SwigluExpert& e : experts_)
    for (const Tensor& t : e.params()) out.push_back(t);
  return out;
}

std::pair<long long, long long> MoeLayer::count_params() const {
  const long long gate_n = static_cast<long long>(wg_.numel());
  long long per_expert = experts_.empty() ? 0 : experts_[0].n_params();
  const long long total = gate_n + per_expert * cfg_.n_experts;
  const long long active = gate_n + per_expert * cfg_.top_k;
  return {total, active};
}

void MoeLayer::reset_use_counts() {
  std::fill(use_counts_.begin(), use_counts_.end(), 0);
}

}  // namespace sutra
