#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sutra/moe.hpp"
#include "sutra/rng.hpp"
#include "sutra/tensor.hpp"

namespace sutra {

// Transformer building blocks shared by the concept stack and the language
// codec. All blocks are pre-norm residual; attention masks are additive
// (0 keeps, -inf drops) and treated as constants by autodiff.

struct LayerNormModule {
  Tensor gain, bias;
  double eps = 1e-5;
  static LayerNormModule init(int d);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<std::pair<std::string, Tensor>>& out) const;
};

struct MultiHeadAttention {
  int heads = 0;
  bool use_rotary = true;
  Tensor wq, wk, wv, wo;  // d x d

  static MultiHeadAttention init(int d, int heads, bool use_rotary, Rng& rng);
  // x: (B,Tq,d) queries; kv: (B,Tk,d) keys/values; mask: (Bm,Tq,Tk) or
  // undefined; cos/sin: rotary tables, ignored unless use_rotary.
  Tensor forward(const Tensor& x, const Tensor& kv, const Tensor& mask, const Tensor& cos_t,
                 const Tensor& sin_t) const;
  void collect(const std::string& prefix, std::vector<std::pair<std::string, Tensor>>& out) const;
};

// positions j > i dropped; shape (1,T,T)
Tensor causal_mask(int T);
// key padding: (B,Tq,Tk), keys at j >= lengths[b] dropped
Tensor key_pad_mask(int Tq, int Tk, const std::vector<int>& lengths);
// causal + key padding in one (B,T,T)
Tensor causal_pad_mask(int T, const std::vector<int>& lengths);

struct EncoderBlock {
  LayerNormModule ln1, ln2;
  MultiHeadAttention attn;  // bidirectional
  SwigluExpert ffn;
  static EncoderBlock init(int d, int heads, int ffn_dim, Rng& rng);
  Tensor forward(const Tensor& x, const Tensor& mask, const Tensor& cos_t,
                 const Tensor& sin_t) const;
  void collect(const std::string& prefix, std::vector<std::pair<std::string, Tensor>>& out) const;
};

struct DecoderBlock {
  LayerNormModule ln1, lnx, ln2;
  MultiHeadAttention self_attn;   // causal, rotary
  MultiHeadAttention cross_attn;  // over concept vectors, no rotary
  SwigluExpert ffn;
  static DecoderBlock init(int d, int heads, int ffn_dim, Rng& rng);
  Tensor forward(const Tensor& x, const Tensor& self_mask, const Tensor& kv,
                 const Tensor& cross_mask, const Tensor& cos_t, const Tensor& sin_t) const;
  void collect(const std::string& prefix, std::vector<std::pair<std::string, Tensor>>& out) const;
};

// Concept-stack block: causal self-attention + expert mixture (or a plain
// feed-forward on layers the mixture skips).
struct ConceptBlock {
  LayerNormModule ln1, ln2;
  MultiHeadAttention attn;
  bool use_moe = true;
  MoeLayer moe;
  SwigluExpert ffn;
  static ConceptBlock init(int d, int heads, int ffn_dim, int n_experts, int top_k, bool use_moe,
                           Rng& rng);
  Tensor forward(const Tensor& x, const Tensor& mask, const Tensor& cos_t,
                 const Tensor& sin_t) const;
  void collect(const std::string& prefix, std::vector<std::pair<std::string, Tensor>>& out) const;
};

}  // namespace sutra
