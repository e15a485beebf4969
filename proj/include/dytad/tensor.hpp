#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dytad {

// Rank-2 dense array, channels x time, row-major (channel-major, time-minor).
template <typename S>
using Array = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Array64 = Array<double>;
using Array32 = Array<float>;

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

#define DYTAD_REQUIRE(cond, msg) \
  do {                           \
    if (!(cond)) ::dytad::fail(msg); \
  } while (0)

namespace detail {

// One recorded operation. The tape is distributed: each node keeps parent
// references and a closure that pushes its accumulated gradient into them.
// Gradients are keyed by node identity and accumulate across backward calls
// until explicitly cleared.
template <typename S>
struct Node {
  Array<S> value;
  Array<S> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<S>>> parents;
  std::function<void(Node<S>&)> backprop;

  void accumulate(const Array<S>& g) {
    if (grad.size() == 0) grad = Array<S>::Zero(value.rows(), value.cols());
    grad += g;
  }
};

}  // namespace detail

// Value handle into the recording graph. Cheap to copy; the underlying
// tensor is immutable after construction except for parameter updates
// between graphs (values_mut) and gradient accumulation.
template <typename S>
class Var {
 public:
  using Node = detail::Node<S>;

  Var() = default;

  static Var constant(Array<S> v) { return Var(std::move(v), false); }
  static Var param(Array<S> v) { return Var(std::move(v), true); }
  static Var scalar(S v, bool requires_grad = false) {
    Array<S> a(1, 1);
    a(0, 0) = v;
    return Var(std::move(a), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Array<S>& value() const { return node_->value; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  // Accumulated gradient; zeros if backward has not reached this node.
  Array<S> grad() const {
    if (node_->grad.size() == 0)
      return Array<S>::Zero(node_->value.rows(), node_->value.cols());
    return node_->grad;
  }
  bool has_grad() const { return node_ && node_->grad.size() > 0; }
  Array<S>& grad_mut() const { return node_->grad; }
  void clear_grad() const { node_->grad.resize(0, 0); }

  // In-place parameter update, for optimizers only; never call on a value
  // that is part of a live graph. (Var is a handle: constness of the handle
  // does not extend to the stored tensor.)
  Array<S>& values_mut() const { return node_->value; }

  std::shared_ptr<Node> node() const { return node_; }

  static Var from_node(std::shared_ptr<Node> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  Var(Array<S> v, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(v);
    node_->requires_grad = requires_grad;
  }

  std::shared_ptr<Node> node_;
};

namespace detail {

template <typename S>
Var<S> make_op(Array<S> value, std::vector<Var<S>> parents,
               std::function<void(Node<S>&)> backprop) {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(value);
  for (const auto& p : parents)
    if (p.requires_grad()) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backprop = std::move(backprop);
  }
  return Var<S>::from_node(std::move(n));
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// reachable node that requires them; repeated calls without clear_grad add up.
template <typename S>
void backward(const Var<S>& loss) {
  DYTAD_REQUIRE(loss.defined() && loss.rows() == 1 && loss.cols() == 1,
                "backward: loss must be a scalar tensor");
  using Node = detail::Node<S>;
  if (!loss.requires_grad()) return;

  // iterative post-order DFS
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior grads are per-sweep scratch; only leaves accumulate across calls.
  for (Node* n : order)
    if (n->backprop) n->grad.resize(0, 0);

  loss.node()->accumulate(Array<S>::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->grad.size() != 0) n->backprop(*n);
  }
}

}  // namespace dytad
