#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "deffx/autodiff/tensor.hpp"

namespace deffx {

using NodeId = std::int32_t;

template <typename T>
class Tape;

// A named trainable tensor owned by a module. Parameters outlive tapes; a tape
// binds each parameter to a single leaf node per forward pass.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, NodeId id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  NodeId id() const { return id_; }
  Tape<T>& tape() const { return *tape_; }
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  bool requires_grad() const;

 private:
  Tape<T>* tape_ = nullptr;
  NodeId id_ = -1;
};

template <typename T>
class Gradients {
 public:
  // Gradient w.r.t. a requires_grad leaf. Throws if the leaf is unknown.
  const Tensor<T>& operator[](const Var<T>& leaf) const;
  const Tensor<T>& at(NodeId id) const;
  // Nullptr if the parameter was not bound on the tape.
  const Tensor<T>* find(const Parameter<T>& p) const;

  const std::map<NodeId, Tensor<T>>& by_node() const { return by_node_; }

 private:
  friend class Tape<T>;
  std::map<NodeId, Tensor<T>> by_node_;
  std::unordered_map<const Parameter<T>*, NodeId> params_;
};

// Records primitive applications in execution order (which is a topological
// order) and replays their adjoint rules in reverse.
template <typename T>
class Tape {
 public:
  // Receives the node's own output value and the gradient flowing into it.
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& out, const Tensor<T>& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // With gradients disabled nothing is retained for the backward pass and every
  // node, including bound parameters, is a constant.
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Tensor<T> value);
  Var<T> leaf(Tensor<T> value, bool requires_grad = true);
  // Binds a parameter; repeated calls on the same tape return the same node.
  Var<T> param(const Parameter<T>& p);

  // Appends the result of a primitive. `fn` is kept only if some input
  // requires a gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn);
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn fn);

  const Tensor<T>& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient accumulator for `id`, zero-initialized on first access. Only
  // meaningful inside a backward pass.
  Tensor<T>& grad_slot(NodeId id);

  // Reverse sweep from a single-element root. Throws InvalidArgument for a
  // non-scalar root or a root from another tape.
  Gradients<T> backward(const Var<T>& root);

 private:
  struct Node {
    Tensor<T> value;
    bool requires_grad = false;
    bool is_leaf = false;
    BackwardFn backward;
  };

  Var<T> push(Node node);
  void check_owned(const Var<T>& v) const;

  std::deque<Node> nodes_;  // deque: value() references stay valid as nodes are added
  std::vector<Tensor<T>> grads_;
  std::unordered_map<const Parameter<T>*, NodeId> bound_params_;
  bool grad_enabled_ = true;
  bool in_backward_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

extern template class Tape<float>;
extern template class Tape<double>;
extern template class Gradients<float>;
extern template class Gradients<double>;

}  // namespace deffx
