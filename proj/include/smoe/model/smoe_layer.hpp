// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "smoe/common/rng.hpp"
#include "smoe/model/params.hpp"
#include "smoe/nn/tape.hpp"

namespace smoe::model {

/// Two-layer GELU MLP, d_model -> hidden -> d_model.
class ExpertMLP {
 public:
  ExpertMLP(std::size_t d_model, std::size_t hidden, Rng& rng);

  nn::Var forward(nn::Tape& tape, nn::Var x);
  void collect(ParamList& out, const std::string& prefix);

  std::size_t d_model() const { return w1.dim(0); }
  std::size_t hidden_dim() const { return w1.dim(1); }
  static constexpr const char* activation() { return "gelu"; }

  nn::Tensor w1, b1, w2, b2;
};

/// Per-expert count of (token, expert) assignments.
struct ExpertUsage {
  std::vector<std::uint64_t> counts;
  std::uint64_t total() const;
  /// Shannon entropy (nats) of the normalized counts; 0 when empty.
  double entropy() const;
};

/// Sparse mixture of T homogeneous experts behind a linear top-k router:
/// f(x) = sum_{j in top-k} softmax_selected(x W_r)_j * expert_j(x).
class SMoELayer {
 public:
  SMoELayer(std::size_t d_model, std::size_t hidden, std::size_t num_experts, std::size_t k_train,
            Rng& rng);

  /// x [n x d_model] -> [n x d_model]. Each row is routed independently; only
  /// experts chosen by at least one row are evaluated. Throws ConfigError for
  /// k outside [1, T] and ContractViolation for a width mismatch.
  nn::Var forward(nn::Tape& tape, nn::Var x, std::size_t k, ExpertUsage* usage = nullptr);

  void collect(ParamList& out, const std::string& prefix);

  std::size_t num_experts() const { return experts.size(); }
  std::size_t d_model() const { return router_weights.dim(0); }

  void set_k_train(std::size_t k);
  void set_k_infer(std::size_t k);
  std::size_t k_train() const { return k_train_; }
  std::size_t k_infer() const { return k_infer_; }

  std::vector<ExpertMLP> experts;
  nn::Tensor router_weights;  // [d_model x T]

 private:
  std::size_t k_train_;
  std::size_t k_infer_;
};

/// Weighted scatter of per-expert outputs back to token rows:
/// out[r] = sum_j gates[r, j] * expert_out_j[row r within rows_j].
/// `expert_outputs[j]` is ignored when `expert_rows[j]` is empty.
nn::Var combine_experts(nn::Tape& tape, nn::Var gates, std::span<const nn::Var> expert_outputs,
                        const std::vector<std::vector<std::size_t>>& expert_rows);

}  // namespace smoe::model
