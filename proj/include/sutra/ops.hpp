#pragma once

#include <utility>
#include <vector>

#include "sutra/tensor.hpp"

namespace sutra {

// Differentiable free functions over Tensor. All of them validate shapes,
// produce a fresh output tensor, and record a backward rule when grad mode is
// on. Integer ids (token ids, row indices) travel as plain vectors and are
// treated as constants.

// elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor silu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sqrt_elem(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

// shape
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute_0213(const Tensor& x);  // (A,B,C,D) -> (A,C,B,D)
Tensor slice_lastdim(const Tensor& x, int offset, int len);

// row ops; x viewed as a matrix rows x D
Tensor gather_rows(const Tensor& x, const std::vector<int>& idx);
Tensor scatter_rows(int total_rows, const std::vector<int>& idx, const Tensor& y);
Tensor scale_rows(const Tensor& x, const Tensor& w);          // w: (R)
Tensor add_per_batch_row(const Tensor& x, const Tensor& r);   // x:(B,T,D) r:(B,D)
Tensor mean_axis1(const Tensor& x);                           // (B,T,D) -> (B,D)
Tensor masked_mean_axis1(const Tensor& x, const Tensor& mask);  // mask:(B,T) of 0/1

// reductions
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor sum_lastdim(const Tensor& x);  // (N,D) -> (N)

// linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);     // (m,k)x(k,n)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (m,k)x(n,k) -> (m,n)
Tensor bmm(const Tensor& a, const Tensor& b);        // (N,m,k)x(N,k,n)
Tensor bmm_nt(const Tensor& a, const Tensor& b);     // (N,m,k)x(N,n,k) -> (N,m,n)

// normalization and losses
Tensor softmax(const Tensor& x, int axis);
Tensor softmax_lastdim(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);

// attention helpers
// scores: (B*H, Tq, Tk); mask: (Bm, Tq, Tk) with Bm in {1, B}, entries 0 or -inf.
Tensor add_attn_mask(const Tensor& scores, const Tensor& mask, int heads);
// x: (N, T, Dh); cos/sin: (T, Dh/2). Rotates feature pairs (2p, 2p+1).
Tensor rotary(const Tensor& x, const Tensor& cos_t, const Tensor& sin_t);
std::pair<Tensor, Tensor> rotary_tables(int max_len, int head_dim, double theta = 10000.0);

}  // namespace sutra
