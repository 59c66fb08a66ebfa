// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "smoe/nn/tensor.hpp"

namespace smoe::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
/// iteration is a valid topological order for backpropagation.
///
/// Parameters are bound by reference: their gradients accumulate directly into
/// the owning Tensor's grad buffer and persist across backward() calls until
/// the owner zeroes them.
class Tape {
 public:
  /// Receives the gradient of the node's output; pushes into inputs via grad().
  using Backward = std::function<void(Tape&, std::span<const double> out_grad)>;

  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  Var constant(Tensor value);
  /// Binds an externally owned parameter. Gradient flows only if
  /// param.requires_grad() and the tape is recording.
  Var parameter(Tensor& param);

  const Tensor& value(Var v) const;
  const Shape& shape(Var v) const { return value(v).shape(); }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

  /// Appends an op result. The backward rule is dropped when no input needs grad.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor value, std::span<const Var> inputs, Backward backward);

  /// Gradient buffer of v, allocated on first use. Only valid for needs_grad(v).
  std::span<double> grad(Var v);

  /// Propagates d(loss)/d(node) for every node. loss must have one element.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::size_t>& inputs_of(Var v) const { return nodes_.at(v.id).inputs; }

 private:
  struct Node {
    Tensor value;
    Tensor* external = nullptr;
    std::vector<std::size_t> inputs;
    std::vector<double> grad;
    Backward backward;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  bool recording_;
};

}  // namespace smoe::nn
