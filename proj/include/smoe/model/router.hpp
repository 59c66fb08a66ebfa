// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "smoe/nn/tape.hpp"

namespace smoe::model {

/// Sparse mixture weights for one input.
///
/// Exactly k entries of `weights` are nonzero; they are the softmax of the
/// logits restricted to `selected` and sum to one. Everything else is 0.
struct RouterOutput {
  std::vector<double> weights;
  std::vector<std::size_t> selected;  // ascending expert ids
  std::vector<double> logits;
};

/// Top-k softmax gating over one logit vector. Ties in the selection go to the
/// lower expert id. Throws ConfigError unless 1 <= k <= logits.size().
RouterOutput route(std::span<const double> logits, std::size_t k);

/// Tape version over logits [n x T]. Returns gate weights [n x T]; gradient
/// reaches only the selected logits of each row. When `selections` is given it
/// receives the ascending selected ids per row.
nn::Var top_k_gate(nn::Tape& tape, nn::Var logits, std::size_t k,
                   std::vector<std::vector<std::size_t>>* selections = nullptr);

}  // namespace smoe::model
