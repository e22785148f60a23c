#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sutra/errors.hpp"
#include "sutra/rng.hpp"

namespace sutra {

// Row-major dense tensor of doubles with reverse-mode autodiff. Ops record a
// Node (parents + backward rule) on their output; backward(loss) walks the
// resulting DAG once in reverse topological order. Gradients accumulate into
// the persistent .grad of requires_grad leaves; interior buffers are scratch
// local to each backward call, so calling backward twice doubles leaf grads.

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

class Tensor;

using GradBuffer = std::vector<double>;
// parent_grads[i] is null when parent i does not require grad.
using BackwardFn = std::function<void(const GradBuffer& grad_out, const std::vector<GradBuffer*>& parent_grads)>;

struct TensorImpl;

struct Node {
  std::vector<std::shared_ptr<TensorImpl>> parents;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<double>> data;
  std::shared_ptr<std::vector<double>> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::shared_ptr<Node> node;  // null for leaves
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);

  // Output of an op: requires_grad iff grad mode is on and any parent needs
  // grad, in which case `fn` is attached as the backward rule.
  static Tensor from_op(Shape shape, std::vector<double> values, std::vector<Tensor> parents, BackwardFn fn);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return impl_->data->size(); }

  double* data() { return impl_->data->data(); }
  const double* data() const { return impl_->data->data(); }
  std::vector<double>& vec() { return *impl_->data; }
  const std::vector<double>& vec() const { return *impl_->data; }
  double operator[](std::size_t i) const { return (*impl_->data)[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  // Null until a backward pass has deposited something.
  const std::vector<double>* grad() const { return impl_->grad.get(); }
  std::vector<double>* grad() { return impl_->grad.get(); }
  std::vector<double>& grad_buffer();  // allocates zeros on demand
  void zero_grad();

  double value() const;  // single-element tensors

  bool is_leaf() const { return impl_->node == nullptr; }
  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

  // True when every element is finite.
  bool all_finite() const;

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

struct BackwardStats {
  std::size_t nodes_visited = 0;
  std::size_t leaves_touched = 0;
};

// Reverse-mode sweep from a single-element loss. Leaf .grad accumulates.
BackwardStats backward(const Tensor& loss);

// Grad-mode switch; ops record no graph while disabled.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

void check_finite(const Tensor& t, const std::string& what);

}  // namespace sutra
