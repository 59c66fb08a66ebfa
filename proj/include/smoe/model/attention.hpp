// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

#include "smoe/common/rng.hpp"
#include "smoe/model/params.hpp"
#include "smoe/nn/tape.hpp"

namespace smoe::model {

/// Multi-head scaled dot-product attention with a learned per-head bias on the
/// clipped signed distance between query and key:
///   score[h, i, j] = <q_i, k_j> / sqrt(d_head) + rel_bias[h, clip(i - j, -W, W) + W]
class MultiHeadAttention {
 public:
  MultiHeadAttention(std::size_t d_model, std::size_t num_heads, std::size_t window,
                     std::size_t max_seq_len, Rng& rng, bool causal = true);

  /// x holds `batch` sequences of equal length, flattened to [batch*seq x d].
  /// Only query positions >= query_from are produced, giving
  /// [batch*(seq - query_from) x d]; keys always span the whole sequence.
  /// Throws ConfigError when seq exceeds max_seq_len.
  nn::Var forward(nn::Tape& tape, nn::Var x, std::size_t batch, std::size_t query_from = 0);

  void collect(ParamList& out, const std::string& prefix);

  std::size_t num_heads() const { return num_heads_; }
  std::size_t window() const { return window_; }
  bool causal() const { return causal_; }

  nn::Tensor wq, wk, wv, wo;  // [d x d]
  nn::Tensor rel_bias;        // [H x (2W+1)]

 private:
  std::size_t num_heads_;
  std::size_t window_;
  std::size_t max_seq_len_;
  bool causal_;
};

/// scores [B*H x Sq x Sk] + table[h, clip(q_offset + i - j, -W, W) + W].
nn::Var add_relative_bias(nn::Tape& tape, nn::Var scores, nn::Var table, std::size_t batch,
                          std::size_t heads, std::size_t q_offset, std::size_t window);

}  // namespace smoe::model
