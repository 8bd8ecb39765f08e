// SPDX-License-Identifier: Apache-2.0
#include "potter/tape.hpp"

#include "potter/error.hpp"

namespace potter {

Tape::Tape(bool grad_enabled, Precision precision)
    : grad_enabled_(grad_enabled), precision_(precision) {}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size())
    fail(ErrorCode::invalid_argument, "variable does not belong to this tape");
  return nodes_[v.id];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (precision_ == Precision::f32) value.round_to_f32();
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(const std::string& name, Tensor value) {
  if (parameters_.contains(name))
    fail(ErrorCode::invalid_argument, "duplicate parameter '" + name + "'");
  Var v = leaf(std::move(value), true);
  parameters_.emplace(name, v);
  return v;
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn fn) {
  if (precision_ == Precision::f32) value.round_to_f32();
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (Var p : parents) n.requires_grad = n.requires_grad || node(p).requires_grad;
    if (n.requires_grad) {
      n.parents = std::move(parents);
      n.backward = std::move(fn);
    }
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

void Tape::backward(Var output, const Tensor& seed) {
  if (nodes_.empty()) fail(ErrorCode::invalid_argument, "backward on an empty tape");
  if (!grad_enabled_)
    fail(ErrorCode::invalid_argument, "backward on a tape with gradients disabled");
  const Node& out = node(output);
  if (seed.shape() != out.value.shape())
    fail(ErrorCode::shape_mismatch, "seed shape " + shape_str(seed.shape()) +
                                        " does not match output " +
                                        shape_str(out.value.shape()));
  for (Node& n : nodes_) n.grad = Tensor();
  nodes_[output.id].grad = seed;

  std::vector<Tensor*> parent_grads;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    parent_grads.clear();
    for (Var p : n.parents) {
      Node& pn = nodes_[p.id];
      if (!pn.requires_grad) {
        parent_grads.push_back(nullptr);
        continue;
      }
      if (pn.grad.size() == 0) pn.grad = Tensor(pn.value.shape());
      parent_grads.push_back(&pn.grad);
    }
    n.backward(*this, n.grad, parent_grads);
  }
}

void Tape::backward(Var output) {
  backward(output, Tensor::full(value(output).shape(), 1.0));
}

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) return Tensor(n.value.shape());
  return n.grad;
}

Gradients Tape::parameter_gradients() const {
  Gradients out;
  for (const auto& [name, v] : parameters_) out.emplace(name, grad(v));
  return out;
}

Var Tape::find_parameter(const std::string& name) const {
  auto it = parameters_.find(name);
  return it == parameters_.end() ? Var{} : it->second;
}

}  // namespace potter
