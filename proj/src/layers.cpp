#include "sutra/layers.hpp"

#include <cmath>
#include <limits>

#include "sutra/errors.hpp"
#include "sutra/ops.hpp"

namespace sutra {
namespace {
const double kNinf = -std::numeric_limits<double>::infinity();
}

LayerNormModule LayerNormModule::init(int d) {
  LayerNormModule m;
  m.gain = Tensor::full({d}, 1.0, true);
  m.bias = Tensor::zeros({d}, true);
  return m;
}

Tensor LayerNormModule::forward(const Tensor& x) const { return layer_norm(x, gain, bias, eps); }

void LayerNormModule::collect(const std::string& prefix,
                              std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back(prefix + ".gain", gain);
  out.emplace_back(prefix + ".bias", bias);
}

MultiHeadAttention MultiHeadAttention::init(int d, int heads, bool use_rotary, Rng& rng) {
  if (heads <= 0 || d % heads != 0)
    throw ConfigError("attention: dim " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  MultiHeadAttention m;
  m.heads = heads;
  m.use_rotary = use_rotary;
  const double s = 1.0 / std::sqrt(d);
  m.wq = Tensor::randn({d, d}, rng, s, true);
  m.wk = Tensor::randn({d, d}, rng, s, true);
  m.wv = Tensor::randn({d, d}, rng, s, true);
  m.wo = Tensor::randn({d, d}, rng, s, true);
  return m;
}

Tensor MultiHeadAttention::forward(const Tensor& x, const Tensor& kv, const Tensor& mask,
                                   const Tensor& cos_t, const Tensor& sin_t) const {
  const int B = x.dim(0), Tq = x.dim(1), d = x.dim(2);
  const int Tk = kv.dim(1);
  const int dh = d / heads;

  auto split = [&](const Tensor& inp, const Tensor& w, int T) {
    Tensor p = matmul(reshape(inp, {B * T, d}), w);
    return reshape(permute_0213(reshape(p, {B, T, heads, dh})), {B * heads, T, dh});
  };
  Tensor q = split(x, wq, Tq);
  Tensor k = split(kv, wk, Tk);
  Tensor v = split(kv, wv, Tk);
  if (use_rotary) {
    q = rotary(q, cos_t, sin_t);
    k = rotary(k, cos_t, sin_t);
  }
  Tensor scores = scale(bmm_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dh)));
  if (mask.defined()) scores = add_attn_mask(scores, mask, heads);
  Tensor ctx = bmm(softmax(scores, 2), v);
  Tensor merged = reshape(permute_0213(reshape(ctx, {B, heads, Tq, dh})), {B * Tq, d});
  return reshape(matmul(merged, wo), {B, Tq, d});
}

void MultiHeadAttention::collect(const std::string& prefix,
                                 std::vector<std::pair<std::string, Tensor>>& out) const {
  out.emplace_back(prefix + ".wq", wq);
  out.emplace_back(prefix + ".wk", wk);
  out.emplace_back(prefix + ".wv", wv);
  out.emplace_back(prefix + ".wo", wo);
}

Tensor causal_mask(int T) {
  std::vector<double> m(static_cast<size_t>(T) * T, 0.0);
  for (int i = 0; i < T; ++i)
    for (int j = i + 1; j < T; ++j) m[static_cast<size_t>(i) * T + j] = kNinf;
  return Tensor::from_vector({1, T, T}, std::move(m));
}

Tensor key_pad_mask(int Tq, int Tk, const std::vector<int>& lengths) {
  const int B = static_cast<int>(lengths.size());
  std::vector<double> m(static_cast<size_t>(B) * Tq * Tk, 0.0);
  for (int b = 0; b < B; ++b) {
    if (lengths[b] < 1 || lengths[b] > Tk)
      throw ShapeError("key_pad_mask: length " + std::to_string(lengths[b]) + " outside [1," +
                       std::to_string(Tk) + "]");
    for (int i = 0; i < Tq; ++i)
      for (int j = lengths[b]; j < Tk; ++j)
        m[(static_cast<size_t>(b) * Tq + i) * Tk + j] = kNinf;
  }
  return Tensor::from_vector({B, Tq, Tk}, std::move(m));
}

Tensor causal_pad_mask(int T, const std::vector<int>& lengths) {
  const int B = static_cast<int>(lengths.size());
  std::vector<double> m(static_cast<size_t>(B) * T * T, 0.0);
  for (int b = 0; b < B; ++b) {
    if (lengths[b] < 1 || lengths[b] > T)
      throw ShapeError("causal_pad_mask: length " + std::to_string(lengths[b]) + " outside [1," +
                       std::to_string(T) + "]");
    for (int i = 0; i < T; ++i)
      for (int j = 0; j < T; ++j)
        if (j > i || j >= lengths[b]) m[(static_cast<size_t>(b) * T + i) * T + j] = kNinf;
  }
  return Tensor::from_vector({B, T, T}, std::move(m));
}

EncoderBlock EncoderBlock::init(int d, int heads, int ffn_dim, Rng& rng) {
  EncoderBlock blk;
  blk.ln1 = LayerNormModule::init(d);
  blk.ln2 = LayerNormModule::init(d);
  blk.attn = MultiHeadAttention::init(d, heads, /*use_rotary=*/true, rng);
  blk.ffn = SwigluExpert::init(d, ffn_dim, rng);
  return blk;
}

Tensor EncoderBlock::forward(const Tensor& x, const Tensor& mask, const Tensor& cos_t,
                             const Tensor& sin_t) const {
  Tensor n1 = ln1.forward(x);
  Tensor h = add(x, attn.forward(n1, n1, mask, cos_t, sin_t));
  const int B = h.dim(0), T = h.dim(1), d = h.dim(2);
  Tensor ff = reshape(ffn.forward(reshape(ln2.forward(h), {B * T, d})), {B, T, d});
  return add(h, ff);
}

void EncoderBlock::collect(const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor>>& out) const {
  ln1.collect(prefix + ".ln1", out);
  attn.collect(prefix + ".attn", out);
  ln2.collect(prefix + ".ln2", out);
  out.emplace_back(prefix + ".ffn.w1", ffn.w1);
  out.emplace_back(prefix + ".ffn.w3", ffn.w3);
  out.emplace_back(prefix + ".ffn.w2", ffn.w2);
}

DecoderBlock DecoderBlock::init(int d, int heads, int ffn_dim, Rng& rng) {
  DecoderBlock blk;
  blk.ln1 = LayerNormModule::init(d);
  blk.lnx = LayerNormModule::init(d);
  blk.ln2 = LayerNormModule::init(d);
  blk.self_attn = MultiHeadAttention::init(d, heads, /*use_rotary=*/true, rng);
  blk.cross_attn = MultiHeadAttention::init(d, heads, /*use_rotary=*/false, rng);
  blk.ffn = SwigluExpert::init(d, ffn_dim, rng);
  return blk;
}

Tensor DecoderBlock::forward(const Tensor& x, const Tensor& self_mask, const Tensor& kv,
                             const Tensor& cross_mask, const Tensor& cos_t,
                             const Tensor& sin_t) const {
  Tensor n1 = ln1.forward(x);
  Tensor h = add(x, self_attn.forward(n1, n1, self_mask, cos_t, sin_t));
  h = add(h, cross_attn.forward(lnx.forward(h), kv, cross_mask, Tensor(), Tensor()));
  const int B = h.dim(0), T = h.dim(1), d = h.dim(2);
  Tensor ff = reshape(ffn.forward(reshape(ln2.forward(h), {B * T, d})), {B, T, d});
  return add(h, ff);
}

void DecoderBlock::collect(const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor>>& out) const {
  ln1.collect(prefix + ".ln1", out);
  self_attn.collect(prefix + ".self_attn", out);
  lnx.collect(prefix + ".lnx", out);
  cross_attn.collect(prefix + ".cross_attn", out);
  ln2.collect(prefix + ".ln2", out);
  out.emplace_back(prefix + ".ffn.w1", ffn.w1);
  out.emplace_back(prefix + ".ffn.w3", ffn.w3);
  out.emplace_back(prefix + ".ffn.w2", ffn.w2);
}

ConceptBlock ConceptBlock::init(int d, int heads, int ffn_dim, int n_experts, int top_k,
                                bool use_moe, Rng& rng) {
  ConceptBlock blk;
  blk.ln1 = LayerNormModule::init(d);
  blk.ln2 = LayerNormModule::init(d);
  blk.attn = MultiHeadAttention::init(d, heads, /*use_rotary=*/true, rng);
  blk.use_moe = use_moe;
  if (use_moe) {
    blk.moe = MoeLayer(MoeConfig{d, ffn_dim, n_experts, top_k}, rng);
  } else {
    blk.ffn = SwigluExpert::init(d, ffn_dim, rng);
  }
  return blk;
}

Tensor ConceptBlock::forward(const Tensor& x, const Tensor& mask, const Tensor& cos_t,
                             const Tensor& sin_t) const {
  Tensor n1 = ln1.forward(x);
  Tensor h = add(x, attn.forward(n1, n1, mask, cos_t, sin_t));
  Tensor n2 = ln2.forward(h);
  Tensor ff;
  if (use_moe) {
    ff = moe.forward(n2);
  } else {
    const int B = h.dim(0), T = h.dim(1), d = h.dim(2);
    ff = reshape(ffn.forward(reshape(n2, {B * T, d})), {B, T, d});
  }
  return add(h, ff);
}

void ConceptBlock::collect(const std::string& prefix,
                           std::vector<std::pair<std::string, Tensor>>& out) const {
  ln1.collect(prefix + ".ln1", out);
  attn.collect(prefix + ".attn", out);
  ln2.collect(prefix + ".ln2", out);
  if (use_moe) {
    out.emplace_back(prefix + ".moe.wg", moe.gate_weights());
    for (size_t e = 0; e < moe.experts().size(); ++e) {
      const SwigluExpert& ex = moe.experts()[e];
      out.emplace_back(prefix + ".moe.expert" + std::to_string(e) + ".w1", ex.w1);
      out.emplace_back(prefix + ".moe.expert" + std::to_string(e) + ".w3", ex.w3);
      out.emplace_back(prefix + ".moe.expert" + std::to_string(e) + ".w2", ex.w2);
    }
  } else {
    out.emplace_back(prefix + ".ffn.w1", ffn.w1);
    out.emplace_back(prefix + ".ffn.w3", ffn.w3);
    out.emplace_back(prefix + ".ffn.w2", ffn.w2);
  }
}

}  // namespace sutra
