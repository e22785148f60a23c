#include "sutra/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace sutra {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << ")";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

static void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (int d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  validate_shape(shape);
  auto impl = std::make_shared<TensorImpl>();
  impl->data = std::make_shared<std::vector<double>>(shape_numel(shape), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.vec().begin(), t.vec().end(), value);
  return t;
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values, bool requires_grad) {
  validate_shape(shape);
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->data = std::make_shared<std::vector<double>>(std::move(values));
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_vector({1}, {value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.vec()) v = rng.normal(0.0, stddev);
  return t;
}

Tensor Tensor::from_op(Shape shape, std::vector<double> values, std::vector<Tensor> parents, BackwardFn fn) {
  bool rg = false;
  if (g_grad_enabled) {
    for (const Tensor& p : parents) rg = rg || p.requires_grad();
  }
  Tensor out = from_vector(std::move(shape), std::move(values), rg);
  if (rg) {
    auto node = std::make_shared<Node>();
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) node->parents.push_back(p.impl_ptr());
    node->backward = std::move(fn);
    out.impl_->node = std::move(node);
  }
  return out;
}

std::vector<double>& Tensor::grad_buffer() {
  if (!impl_->grad) impl_->grad = std::make_shared<std::vector<double>>(numel(), 0.0);
  return *impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_->grad) std::fill(impl_->grad->begin(), impl_->grad->end(), 0.0);
}

double Tensor::value() const {
  if (numel() != 1) throw ShapeError("value() requires a single-element tensor, got " + shape_str(shape()));
  return (*impl_->data)[0];
}

bool Tensor::all_finite() const {
  for (double v : *impl_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void check_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw NumericError(what + " contains a non-finite value");
}

BackwardStats backward(const Tensor& loss) {
  if (!loss.defined()) throw StateError("backward on undefined tensor");
  if (loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got " + shape_str(loss.shape()));
  }

  // Postorder DFS over grad-requiring ancestry; reversed it is a topological
  // order (consumers before producers), so each node fires exactly once with
  // its full output gradient.
  std::vector<TensorImpl*> postorder;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;

  TensorImpl* root = loss.impl();
  if (root->requires_grad) {
    stack.push_back({root, 0});
    visited.insert(root);
  }
  while (!stack.empty()) {
    auto& [impl, idx] = stack.back();
    const auto& parents = impl->node ? impl->node->parents : std::vector<std::shared_ptr<TensorImpl>>{};
    if (idx < parents.size()) {
      TensorImpl* p = parents[idx].get();
      ++idx;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      postorder.push_back(impl);
      stack.pop_back();
    }
  }

  std::unordered_map<TensorImpl*, GradBuffer> scratch;
  scratch[root] = GradBuffer(1, 1.0);

  auto buffer_for = [&scratch](TensorImpl* impl) -> GradBuffer& {
    auto it = scratch.find(impl);
    if (it == scratch.end()) it = scratch.emplace(impl, GradBuffer(impl->data->size(), 0.0)).first;
    return it->second;
  };

  BackwardStats stats;
  for (auto it = postorder.rbegin(); it != postorder.rend(); ++it) {
    TensorImpl* impl = *it;
    if (!impl->node) continue;
    GradBuffer& gout = buffer_for(impl);
    std::vector<GradBuffer*> parent_grads;
    parent_grads.reserve(impl->node->parents.size());
    for (const auto& p : impl->node->parents) {
      parent_grads.push_back(p->requires_grad ? &buffer_for(p.get()) : nullptr);
    }
    impl->node->backward(gout, parent_grads);
    ++stats.nodes_visited;
  }

  for (TensorImpl* impl : postorder) {
    if (impl->node || !impl->requires_grad) continue;
    if (!impl->grad) impl->grad = std::make_shared<std::vector<double>>(impl->data->size(), 0.0);
    const GradBuffer& g = buffer_for(impl);
    for (std::size_t i = 0; i < g.size(); ++i) (*impl->grad)[i] += g[i];
    ++stats.leaves_touched;
  }
  return stats;
}

}  // namespace sutra
