#include "doctest.h"

#include <cmath>
#include <vector>

#include "sutra/moe.hpp"
#include "sutra/ops.hpp"
#include "sutra/tensor.hpp"
#include "testutil.hpp"

using namespace sutra;
using testutil::grad_check;
using testutil::weighted_sum;

namespace {

// layer whose gate logits equal the input directly (W_g = I)
MoeLayer identity_gate_layer(int n, int K, Rng& rng) {
  MoeConfig cfg{n, 2 * n, n, K};
  MoeLayer layer(cfg, rng);
  std::vector<double> eye(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) eye[static_cast<size_t>(i) * n + i] = 1.0;
  const_cast<Tensor&>(layer.gate_weights()) = Tensor::from_vector({n, n}, std::move(eye), true);
  return layer;
}

}  // namespace

TEST_SUITE("moe") {

TEST_CASE("config validation") {
  Rng r(1);
  CHECK_THROWS_AS(MoeLayer(MoeConfig{4, 8, 4, 0}, r), ConfigError);
  CHECK_THROWS_AS(MoeLayer(MoeConfig{4, 8, 4, 5}, r), ConfigError);
  CHECK_THROWS_AS(MoeLayer(MoeConfig{0, 8, 4, 2}, r), ConfigError);
  CHECK_NOTHROW(MoeLayer(MoeConfig{4, 8, 4, 4}, r));
}

TEST_CASE("gate keeps top-K and renormalizes exactly there") {
  Rng r(2);
  MoeLayer layer = identity_gate_layer(4, 2, r);
  GateOutput g = layer.gate(Tensor::from_vector({1, 4}, {2.0, 1.0, 0.0, -1.0}));
  // direct evaluation: softmax over {2,1} = {e/(e+1), 1/(e+1)}
  CHECK(g.weights[0] == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(g.weights[1] == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK(g.weights[2] == 0.0);
  CHECK(g.weights[3] == 0.0);
  CHECK(g.selected[0] == std::vector<int>{0, 1});
}

TEST_CASE("equal logits break ties toward lower indices") {
  Rng r(3);
  MoeLayer layer = identity_gate_layer(4, 2, r);
  GateOutput g = layer.gate(Tensor::from_vector({1, 4}, {0.5, 0.5, 0.5, 0.5}));
  CHECK(g.selected[0] == std::vector<int>{0, 1});
  CHECK(g.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.weights[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.weights[2] == 0.0);
  CHECK(g.weights[3] == 0.0);
}

TEST_CASE("K equal to n reduces to the full softmax") {
  Rng r(4);
  MoeLayer layer = identity_gate_layer(3, 3, r);
  Tensor x = Tensor::from_vector({1, 3}, {0.3, -0.7, 1.1});
  GateOutput g = layer.gate(x);
  Tensor full = softmax(Tensor::from_vector({1, 3}, {0.3, -0.7, 1.1}), 1);
  for (int i = 0; i < 3; ++i) {
    CHECK(g.weights[i] == doctest::Approx(full[i]).epsilon(1e-12));
    CHECK(g.weights[i] > 0.0);
  }
}

TEST_CASE("sparsity law: exactly K nonzeros summing to one") {
  Rng r(5);
  for (int n : {2, 4, 8}) {
    const int K = n / 2 + 1;
    MoeLayer layer(MoeConfig{6, 12, n, K}, r);
    Tensor x = Tensor::randn({64, 6}, r);
    GateOutput g = layer.gate(x);
    for (int row = 0; row < 64; ++row) {
      int nonzero = 0;
      double sum = 0.0;
      for (int e = 0; e < n; ++e) {
        const double w = g.weights[static_cast<size_t>(row) * n + e];
        if (w != 0.0) ++nonzero;
        sum += w;
      }
      CHECK(nonzero == K);
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("identity experts reproduce the input") {
  // combination law alone: with E_i = id, output = x * sum(gates) = x
  Rng r(6);
  MoeConfig cfg{5, 10, 4, 2};
  MoeLayer layer(cfg, r);
  Tensor x = Tensor::randn({7, 5}, r);
  GateOutput g = layer.gate(x);
  Tensor flat = reshape(g.weights, {7 * 4, 1});
  Tensor acc;
  for (int e = 0; e < 4; ++e) {
    std::vector<int> rows, widx;
    for (int row = 0; row < 7; ++row)
      for (int sel : g.selected[static_cast<size_t>(row)])
        if (sel == e) {
          rows.push_back(row);
          widx.push_back(row * 4 + e);
        }
    if (rows.empty()) continue;
    Tensor ye = gather_rows(x, rows);  // identity expert
    Tensor we = reshape(gather_rows(flat, widx), {static_cast<int>(rows.size())});
    Tensor contrib = scatter_rows(7, rows, scale_rows(ye, we));
    acc = acc.defined() ? add(acc, contrib) : contrib;
  }
  for (size_t i = 0; i < x.numel(); ++i) CHECK(acc[i] == doctest::Approx(x[i]).epsilon(1e-9));
}

TEST_CASE("K=n forward matches the dense unmasked mixture") {
  Rng r(7);
  MoeConfig cfg{4, 8, 2, 2};
  MoeLayer layer(cfg, r);
  Tensor x = Tensor::randn({9, 4}, r);
  Tensor sparse = layer.forward_rows(x);

  NoGradGuard ng;
  Tensor dense_w = softmax(matmul(x, layer.gate_weights()), 1);
  Tensor dense;
  for (int e = 0; e < 2; ++e) {
    std::vector<int> widx;
    for (int row = 0; row < 9; ++row) widx.push_back(row * 2 + e);
    Tensor we = reshape(gather_rows(reshape(dense_w, {18, 1}), widx), {9});
    Tensor ye = layer.experts()[static_cast<size_t>(e)].forward(x);
    Tensor c = scale_rows(ye, we);
    dense = dense.defined() ? add(dense, c) : c;
  }
  for (size_t i = 0; i < sparse.numel(); ++i)
    CHECK(sparse[i] == doctest::Approx(dense[i]).epsilon(1e-9));
}

TEST_CASE("brute-force masked mixture reconstructs forward for K < n") {
  Rng r(8);
  MoeConfig cfg{4, 8, 4, 2};
  MoeLayer layer(cfg, r);
  Tensor x = Tensor::randn({6, 4}, r);
  Tensor out = layer.forward_rows(x);

  NoGradGuard ng;
  GateOutput g = layer.gate(x);
  for (int row = 0; row < 6; ++row) {
    std::vector<double> expect(4, 0.0);
    for (int e = 0; e < 4; ++e) {
      const double w = g.weights[static_cast<size_t>(row) * 4 + e];
      if (w == 0.0) continue;
      Tensor ye = layer.experts()[static_cast<size_t>(e)].forward(
          gather_rows(x, std::vector<int>{row}));
      for (int d = 0; d < 4; ++d) expect[static_cast<size_t>(d)] += w * ye[d];
    }
    for (int d = 0; d < 4; ++d)
      CHECK(out[static_cast<size_t>(row) * 4 + d] ==
            doctest::Approx(expect[static_cast<size_t>(d)]).epsilon(1e-9));
  }
}

TEST_CASE("single expert passes through with weight one") {
  Rng r(9);
  MoeConfig cfg{3, 6, 1, 1};
  MoeLayer layer(cfg, r);
  Tensor x = Tensor::randn({5, 3}, r);
  GateOutput g = layer.gate(x);
  for (int row = 0; row < 5; ++row) CHECK(g.weights[row] == 1.0);
  Tensor out = layer.forward_rows(x);
  Tensor direct = layer.experts()[0].forward(x);
  for (size_t i = 0; i < out.numel(); ++i)
    CHECK(out[i] == doctest::Approx(direct[i]).epsilon(1e-12));
}

TEST_CASE("unselected experts receive exactly zero gradient") {
  Rng r(10);
  MoeConfig cfg{4, 8, 3, 1};
  MoeLayer layer(cfg, r);
  // one token -> exactly one expert selected
  Tensor x = Tensor::randn({1, 4}, r);
  GateOutput g = layer.gate(x);
  const int chosen = g.selected[0][0];
  backward(sum_all(layer.forward_rows(x)));
  for (int e = 0; e < 3; ++e) {
    for (const Tensor& p : layer.experts()[static_cast<size_t>(e)].params()) {
      if (e == chosen) {
        REQUIRE(p.grad() != nullptr);
        double mag = 0.0;
        for (double v : *p.grad()) mag += std::abs(v);
        CHECK(mag > 0.0);
      } else {
        // untouched parameters never enter the graph
        CHECK(p.grad() == nullptr);
      }
    }
  }
}

TEST_CASE("gradients pass finite differences through the fixed selection") {
  Rng r(11);
  MoeConfig cfg{3, 6, 4, 2};
  MoeLayer layer(cfg, r);
  Tensor x = Tensor::randn({4, 3}, r);
  // confirm the evaluation point sits away from a selection boundary
  GateOutput g0 = layer.gate(x);
  for (int row = 0; row < 4; ++row) {
    std::vector<double> lg;
    for (int e = 0; e < 4; ++e) lg.push_back(g0.logits[static_cast<size_t>(row) * 4 + e]);
    std::sort(lg.begin(), lg.end(), std::greater<>());
    REQUIRE(lg[1] - lg[2] > 1e-3);
  }
  std::vector<Tensor> inputs = {x, layer.gate_weights()};
  for (const Tensor& p : layer.experts()[0].params()) inputs.push_back(p);
  auto res = grad_check([&] { return weighted_sum(layer.forward_rows(x)); }, inputs);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("count_params matches exhaustive enumeration") {
  Rng r(12);
  MoeConfig cfg{16, 32, 4, 2};
  MoeLayer layer(cfg, r);
  auto [total, active] = layer.count_params();
  // enumerate every tensor
  long long sum = 0;
  for (const Tensor& p : layer.params()) sum += static_cast<long long>(p.numel());
  CHECK(total == sum);
  // formula: gate + K experts of 3*d*f
  const long long per_expert = 3LL * 16 * 32;
  CHECK(total == 16LL * 4 + 4 * per_expert);
  CHECK(active == 16LL * 4 + 2 * per_expert);
  CHECK(active < total);

  MoeLayer single(MoeConfig{8, 16, 1, 1}, r);
  auto [t1, a1] = single.count_params();
  CHECK(t1 == a1);
}

TEST_CASE("routing counters track expert usage") {
  Rng r(13);
  MoeConfig cfg{4, 8, 4, 2};
  MoeLayer layer(cfg, r);
  Tensor x = Tensor::randn({10, 4}, r);
  layer.forward_rows(x);
  long long used = 0;
  for (long long c : layer.use_counts()) used += c;
  CHECK(used == 10 * 2);
  layer.reset_use_counts();
  for (long long c : layer.use_counts()) CHECK(c == 0);
}

TEST_CASE("forward validates shape and rejects non-finite input") {
  Rng r(14);
  MoeLayer layer(MoeConfig{4, 8, 2, 1}, r);
  CHECK_THROWS_AS(layer.forward_rows(Tensor::zeros({3, 5})), ShapeError);
  Tensor bad = Tensor::from_vector({1, 4}, {1.0, 2.0, std::nan(""), 0.0});
  CHECK_THROWS_AS(layer.forward_rows(bad), NumericError);
}

}  // TEST_SUITE
