#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sutra/ops.hpp"
#include "sutra/rng.hpp"
#include "sutra/tensor.hpp"

namespace testutil {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "input i elem j: analytic vs numeric"
  bool ok(double tol) const { return max_rel_err < tol; }
};

// Central-difference gradient check. `f` must rebuild the graph from the
// current contents of `inputs` on every call and return a single-element
// tensor. Inputs are flipped to requires_grad for the analytic pass and
// restored afterwards. When an input has more than `max_elems` entries a
// deterministic subsample of elements is probed.
inline GradCheckResult grad_check(const std::function<sutra::Tensor()>& f,
                                  std::vector<sutra::Tensor> inputs, double h = 1e-5,
                                  int max_elems = 64) {
  std::vector<bool> prev_rg;
  for (auto& t : inputs) {
    prev_rg.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }
  sutra::Tensor loss = f();
  sutra::backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) {
    const std::vector<double>* g = t.grad();
    analytic.push_back(g ? *g : std::vector<double>(t.numel(), 0.0));
  }

  GradCheckResult res;
  sutra::Rng pick(0x9e3779b97f4a7c15ULL);
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    sutra::Tensor& t = inputs[ti];
    std::vector<size_t> elems;
    if (static_cast<int>(t.numel()) <= max_elems) {
      for (size_t i = 0; i < t.numel(); ++i) elems.push_back(i);
    } else {
      for (int i = 0; i < max_elems; ++i) elems.push_back(pick.next_below(t.numel()));
    }
    for (size_t ei : elems) {
      const double orig = t.data()[ei];
      double lp, lm;
      {
        sutra::NoGradGuard ng;
        t.data()[ei] = orig + h;
        lp = f().value();
        t.data()[ei] = orig - h;
        lm = f().value();
        t.data()[ei] = orig;
      }
      const double numeric = (lp - lm) / (2.0 * h);
      const double e = rel_err(analytic[ti][ei], numeric);
      if (e > res.max_rel_err) {
        res.max_rel_err = e;
        res.worst = "input " + std::to_string(ti) + " elem " + std::to_string(ei) + ": analytic " +
                    std::to_string(analytic[ti][ei]) + " vs numeric " + std::to_string(numeric);
      }
    }
  }
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    inputs[ti].zero_grad();
    inputs[ti].set_requires_grad(prev_rg[ti]);
  }
  return res;
}

// Scalarize an arbitrary-shaped op output with fixed pseudo-random weights so
// gradient errors cannot cancel symmetrically.
inline sutra::Tensor weighted_sum(const sutra::Tensor& t, unsigned long long salt = 1) {
  sutra::Rng r(0xabcdef1234567890ULL + salt);
  std::vector<double> w(t.numel());
  for (double& v : w) v = r.uniform(0.25, 1.75);
  return sutra::sum_all(sutra::mul(t, sutra::Tensor::from_vector(t.shape(), std::move(w))));
}

}  // namespace testutil
