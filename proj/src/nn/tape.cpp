// SPDX-License-Identifier: Apache-2.0
#include "smoe/nn/tape.hpp"

#include <algorithm>

#include "smoe/common/error.hpp"

namespace smoe::nn {

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Tensor& param) {
  Node node;
  node.external = &param;
  node.needs_grad = recording_ && param.requires_grad();
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  const Node& node = nodes_.at(v.id);
  return node.external ? *node.external : node.value;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    if (in.id >= nodes_.size()) throw ContractViolation("tape input refers to a future node");
    node.inputs.push_back(in.id);
    node.needs_grad = node.needs_grad || nodes_[in.id].needs_grad;
  }
  node.needs_grad = node.needs_grad && recording_;
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

std::span<double> Tape::grad(Var v) {
  Node& node = nodes_.at(v.id);
  if (!node.needs_grad) throw ContractViolation("gradient requested for a node without grad");
  if (node.external) return node.external->grad();
  if (node.grad.empty()) node.grad.assign(node.value.numel(), 0.0);
  return node.grad;
}

void Tape::backward(Var loss) {
  const Tensor& out = value(loss);
  if (out.numel() != 1) {
    throw ContractViolation("backward needs a scalar loss, got shape " + shape_string(out.shape()));
  }
  for (Node& node : nodes_) {
    if (!node.external) std::fill(node.grad.begin(), node.grad.end(), 0.0);
  }
  if (!nodes_[loss.id].needs_grad) return;
  grad(loss)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward) continue;
    if (node.grad.empty()) continue;  // unreachable from the loss
    node.backward(*this, node.grad);
  }
}

}  // namespace smoe::nn
