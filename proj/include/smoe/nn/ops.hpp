// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "smoe/nn/tape.hpp"
#include "smoe/nn/tensor.hpp"

namespace smoe::nn {

// Plain value routines (no tape).

/// Max-subtracted softmax along `axis`. Throws NumericDomainError on non-finite input.
Tensor softmax(const Tensor& logits, std::size_t axis);

/// -log softmax(logits)[target]. Throws IndexError when target >= logits.size().
double cross_entropy(std::span<const double> logits, std::size_t target);

/// Indices of the k largest values in descending value order; equal values
/// resolve to the lowest index first.
std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k);

// Differentiable ops. All matrices are row-major; "rows" means the leading
// axes flattened against the last one.
namespace ops {

/// [n x k] . [k x m] -> [n x m]
Var matmul(Tape& tape, Var a, Var b);
/// Batched: [B x n x k] . [B x k x m], or [B x n x k] . [B x m x k]^T when transpose_b.
Var bmm(Tape& tape, Var a, Var b, bool transpose_b = false);

Var add(Tape& tape, Var a, Var b);
/// x [.. x m] + bias [m], bias broadcast over every row.
Var add_bias(Tape& tape, Var x, Var bias);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var x, double factor);
Var relu(Tape& tape, Var x);
/// GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Var gelu(Tape& tape, Var x);

/// Per-row normalization over the last axis, then gain [d] and bias [d].
Var layer_norm(Tape& tape, Var x, Var gain, Var bias, double eps = 1e-5);

/// Rows of table [V x d] selected by ids -> [n x d].
Var embedding(Tape& tape, Var table, std::span<const std::size_t> ids);

/// Softmax over the last axis.
Var softmax_rows(Tape& tape, Var x);
/// Softmax over the last axis of scores [G x Sq x Sk] where query row i sits at
/// absolute position q_offset + i and may only see keys j <= q_offset + i.
/// Masked entries are exactly zero.
Var causal_softmax(Tape& tape, Var scores, std::size_t q_offset);

/// Mean over rows of cross_entropy(logits[r], targets[r]); logits [n x C].
Var cross_entropy_mean(Tape& tape, Var logits, std::span<const std::size_t> targets);

/// Sum of all elements -> [1].
Var sum(Tape& tape, Var x);
Var reshape(Tape& tape, Var x, Shape shape);
/// x [n x d] -> [rows.size() x d]; repeated rows accumulate gradient.
Var gather_rows(Tape& tape, Var x, std::span<const std::size_t> rows);

/// [B*S x H*D] -> [B*H x S x D]
Var split_heads(Tape& tape, Var x, std::size_t batch, std::size_t heads);
/// [B*H x S x D] -> [B*S x H*D]
Var merge_heads(Tape& tape, Var x, std::size_t batch, std::size_t heads);

}  // namespace ops
}  // namespace smoe::nn
