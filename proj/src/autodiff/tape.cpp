#include "deffx/autodiff/tape.hpp"

#include "deffx/core/error.hpp"
#include "deffx/simd/kernels.hpp"

namespace deffx {

template <typename T>
const Tensor<T>& Gradients<T>::operator[](const Var<T>& leaf) const {
  return at(leaf.id());
}

template <typename T>
const Tensor<T>& Gradients<T>::at(NodeId id) const {
  auto it = by_node_.find(id);
  if (it == by_node_.end()) {
    throw InvalidArgument("no gradient recorded for node " + std::to_string(id) +
                          " (constant or not on this tape)");
  }
  return it->second;
}

template <typename T>
const Tensor<T>* Gradients<T>::find(const Parameter<T>& p) const {
  auto it = params_.find(&p);
  if (it == params_.end()) return nullptr;
  auto g = by_node_.find(it->second);
  return g == by_node_.end() ? nullptr : &g->second;
}

template <typename T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<NodeId>(nodes_.size() - 1));
}

template <typename T>
void Tape<T>::check_owned(const Var<T>& v) const {
  if (!v.valid() || &v.tape() != this) {
    throw InvalidArgument("variable belongs to a different tape");
  }
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.is_leaf = true;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.is_leaf = true;
  n.requires_grad = requires_grad && grad_enabled_;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::param(const Parameter<T>& p) {
  if (auto it = bound_params_.find(&p); it != bound_params_.end()) {
    return Var<T>(this, it->second);
  }
  Var<T> v = leaf(p.value, true);
  bound_params_.emplace(&p, v.id());
  return v;
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  bool needs = false;
  for (const auto& in : inputs) {
    check_owned(in);
    needs = needs || requires_grad(in.id());
  }
  if (needs && grad_enabled_) {
    n.requires_grad = true;
    n.backward = std::move(fn);
  }
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  bool needs = false;
  for (const auto& in : inputs) {
    check_owned(in);
    needs = needs || requires_grad(in.id());
  }
  if (needs && grad_enabled_) {
    n.requires_grad = true;
    n.backward = std::move(fn);
  }
  return push(std::move(n));
}

template <typename T>
Tensor<T>& Tape<T>::grad_slot(NodeId id) {
  auto& g = grads_[static_cast<std::size_t>(id)];
  if (g.size() != nodes_[static_cast<std::size_t>(id)].value.size() || g.empty()) {
    g = Tensor<T>(nodes_[static_cast<std::size_t>(id)].value.shape());
  }
  return g;
}

template <typename T>
Gradients<T> Tape<T>::backward(const Var<T>& root) {
  check_owned(root);
  if (root.value().size() != 1) {
    throw InvalidArgument("backward root must be a scalar, got shape " + to_string(root.shape()));
  }
  if (in_backward_) throw InvalidArgument("re-entrant backward");
  in_backward_ = true;
  struct Reset {
    bool& flag;
    std::vector<Tensor<T>>& grads;
    ~Reset() {
      flag = false;
      grads.clear();
    }
  } reset{in_backward_, grads_};
  grads_.assign(nodes_.size(), Tensor<T>());

  Gradients<T> out;
  if (requires_grad(root.id())) {
    grad_slot(root.id())[0] = T(1);
    for (NodeId i = root.id(); i >= 0; --i) {
      auto& node = nodes_[static_cast<std::size_t>(i)];
      auto& g = grads_[static_cast<std::size_t>(i)];
      if (g.size() == 0 || !node.requires_grad) continue;
      if (node.is_leaf) continue;
      if (node.backward) node.backward(*this, node.value, g);
      g = Tensor<T>();
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    if (!node.is_leaf || !node.requires_grad) continue;
    auto& g = grads_[i];
    if (g.size() == 0) g = Tensor<T>(node.value.shape());
    out.by_node_.emplace(static_cast<NodeId>(i), std::move(g));
  }
  out.params_ = bound_params_;
  return out;
}

template class Tape<float>;
template class Tape<double>;
template class Gradients<float>;
template class Gradients<double>;

}  // namespace deffx
