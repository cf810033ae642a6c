// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense row-major tensor of doubles with a reverse-mode autodiff graph.
//
// A Tensor is a cheap handle onto a shared node. Operations that consume a
// tensor with requires_grad() record their parents and a backward closure;
// backward() walks that graph in reverse topological order and accumulates
// gradients into every reachable node.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sdcsi/error.hpp"

namespace sdcsi {

using Shape = std::vector<std::size_t>;

inline std::size_t numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    for (auto e : shape)
      if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    if (numel_of(shape) != data.size())
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(const Shape& shape, bool requires_grad = false) {
    return Tensor(shape, std::vector<double>(numel_of(shape), 0.0), requires_grad);
  }
  static Tensor full(const Shape& shape, double value, bool requires_grad = false) {
    return Tensor(shape, std::vector<double>(numel_of(shape), value), requires_grad);
  }
  static Tensor scalar(double value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  /// In-place access; mutating a tensor that is part of a live graph
  /// invalidates that graph.
  std::span<double> mutable_data() { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double item() const {
    if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  /// Copy of the values with no graph attached.
  Tensor detach() const { return Tensor(shape(), node_->data, false); }
  /// Deep copy preserving requires_grad, without graph or gradient.
  Tensor clone() const { return Tensor(shape(), node_->data, requires_grad()); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

// Builds an op result. The backward closure is attached only when grad mode
// is on and at least one input participates in differentiation.
inline Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                          std::function<void(Node&)> backward) {
  Tensor out(std::move(shape), std::move(data));
  if (!grad_mode()) return out;
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.parents.reserve(inputs.size());
  for (const auto& t : inputs) node.parents.push_back(t.node());
  node.backward = std::move(backward);
  return out;
}

}  // namespace detail

/// Reverse-mode sweep from a scalar loss. Gradients accumulate; call
/// zero_grad on parameters between steps.
inline void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw UsageError("backward() requires a scalar loss, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  if (!loss.requires_grad()) throw UsageError("backward() on a tensor that does not require grad");

  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

/// Ordered name -> trainable tensor table. Iteration follows insertion order.
class ParameterSet {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(const std::string& name, Tensor tensor) {
    if (contains(name)) throw UsageError("duplicate parameter name '" + name + "'");
    tensor.set_requires_grad(true);
    entries_.emplace_back(name, std::move(tensor));
  }
  bool contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const Entry& e) { return e.first == name; });
  }
  const Tensor& get(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.first == name) return e.second;
    throw UsageError("unknown parameter '" + name + "'");
  }
  Tensor& get(const std::string& name) {
    return const_cast<Tensor&>(std::as_const(*this).get(name));
  }

  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.numel();
    return n;
  }
  void zero_grad() {
    for (auto& e : entries_) e.second.zero_grad();
  }
  /// Deep copy; the copy shares no storage with this set.
  ParameterSet clone() const {
    ParameterSet out;
    for (const auto& e : entries_) out.add(e.first, e.second.clone());
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

}  // namespace sdcsi
