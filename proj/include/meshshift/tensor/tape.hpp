#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "meshshift/tensor/tensor.hpp"

namespace meshshift::tensor {

/// Handle to a value recorded on a tape. Only meaningful for the tape that issued it.
struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
  bool valid() const noexcept { return id != std::numeric_limits<std::uint32_t>::max(); }
  friend bool operator==(Var, Var) = default;
};

template <std::floating_point T>
class BasicGradients;

/// Reverse-mode tape. Values are appended in execution order and are immutable
/// once recorded; backward() replays the recorded closures in exact reverse order.
///
/// A tape constructed with recording = false keeps values only; use it for
/// inference and finite-difference evaluation.
template <std::floating_point T>
class BasicTape {
 public:
  using TensorT = BasicTensor<T>;
  /// Receives the upstream gradient of the node and accumulates into its parents.
  using BackwardFn = std::function<void(std::span<const T> upstream, BasicTape& tape)>;

  explicit BasicTape(bool recording = true) : recording_(recording) {}

  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;
  BasicTape(BasicTape&&) noexcept = default;
  BasicTape& operator=(BasicTape&&) noexcept = default;

  bool recording() const noexcept { return recording_; }

  /// Trainable parameter. Gradients are reported for leaves in creation order.
  Var leaf(TensorT value) {
    Var v = push(std::move(value), recording_, nullptr);
    nodes_[v.id].is_leaf = true;
    leaves_.push_back(v);
    return v;
  }

  Var constant(TensorT value) { return push(std::move(value), false, nullptr); }

  Var record(TensorT value, std::initializer_list<Var> parents, BackwardFn fn) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
  }

  Var record(TensorT value, std::span<const Var> parents, BackwardFn fn) {
    bool needs = false;
    if (recording_) {
      for (Var p : parents) needs = needs || nodes_.at(p.id).needs_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{});
  }

  const TensorT& value(Var v) const { return nodes_.at(v.id).value; }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::span<const Var> leaves() const noexcept { return leaves_; }

  /// Gradient accumulator for v, zero-initialised on first use.
  std::span<T> grad_buffer(Var v) {
    auto& n = nodes_.at(v.id);
    if (n.grad.empty()) n.grad.assign(n.value.numel(), T(0));
    return n.grad;
  }

  BasicGradients<T> backward(Var loss);

 private:
  struct Node {
    TensorT value;
    std::vector<T> grad;
    BackwardFn backward;
    bool needs_grad = false;
    bool is_leaf = false;
  };

  Var push(TensorT value, bool needs_grad, BackwardFn fn) {
    if (nodes_.size() >= std::numeric_limits<std::uint32_t>::max() - 1) {
      throw Error("tape capacity exceeded");
    }
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  bool recording_;
  std::vector<Node> nodes_;
  std::vector<Var> leaves_;

  friend class BasicGradients<T>;
};

/// Gradient map over the leaves of a tape, in leaf creation order.
template <std::floating_point T>
class BasicGradients {
 public:
  BasicGradients() = default;
  BasicGradients(std::vector<Var> leaves, std::vector<BasicTensor<T>> grads)
      : leaves_(std::move(leaves)), grads_(std::move(grads)) {}

  const BasicTensor<T>& of(Var leaf) const {
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
      if (leaves_[i] == leaf) return grads_[i];
    }
    throw Error("variable is not a leaf of the differentiated tape");
  }
  const BasicTensor<T>& operator[](std::size_t i) const { return grads_.at(i); }
  std::size_t size() const noexcept { return grads_.size(); }
  std::vector<BasicTensor<T>>& tensors() noexcept { return grads_; }
  const std::vector<BasicTensor<T>>& tensors() const noexcept { return grads_; }

 private:
  std::vector<Var> leaves_;
  std::vector<BasicTensor<T>> grads_;
};

template <std::floating_point T>
BasicGradients<T> BasicTape<T>::backward(Var loss) {
  const auto& lv = value(loss);
  if (!lv.is_scalar()) {
    throw ShapeError("backward() requires a scalar loss, got shape " + shape_string(lv.shape()));
  }
  for (auto& n : nodes_) n.grad.clear();
  if (nodes_[loss.id].needs_grad) {
    grad_buffer(loss)[0] = T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.backward || n.grad.empty()) continue;
      // Closures only write to parents, which precede this node, so n.grad stays put.
      n.backward(std::span<const T>(n.grad), *this);
    }
  }
  std::vector<BasicTensor<T>> grads;
  grads.reserve(leaves_.size());
  for (Var l : leaves_) {
    auto& n = nodes_[l.id];
    auto g = BasicTensor<T>::zeros(n.value.shape());
    if (!n.grad.empty()) std::copy(n.grad.begin(), n.grad.end(), g.mutable_data().begin());
    g.check_finite("backward");
    grads.push_back(std::move(g));
  }
  return BasicGradients<T>(leaves_, std::move(grads));
}

using Tape = BasicTape<double>;
using Gradients = BasicGradients<double>;

}  // namespace meshshift::tensor
