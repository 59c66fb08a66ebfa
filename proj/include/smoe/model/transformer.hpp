// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "smoe/model/attention.hpp"
#include "smoe/model/config.hpp"
#include "smoe/model/params.hpp"
#include "smoe/model/smoe_layer.hpp"
#include "smoe/nn/tape.hpp"

namespace smoe::model {

/// `batch` token sequences of identical length, flattened row-major.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::vector<std::size_t> ids;
};

enum class RoutingMode { kTrain, kInfer };

struct LayerNormParams {
  explicit LayerNormParams(std::size_t d);
  nn::Var forward(nn::Tape& tape, nn::Var x);
  void collect(ParamList& out, const std::string& prefix);
  nn::Tensor gain, bias;
};

/// Pre-norm block: h = x + attn(ln1(x)); out = h + smoe(ln2(h)).
class TransformerBlock {
 public:
  TransformerBlock(const ModelConfig& config, Rng& rng);

  /// x [batch*seq x d]. With query_from > 0 only those trailing positions are
  /// produced, [batch*(seq-query_from) x d].
  nn::Var forward(nn::Tape& tape, nn::Var x, std::size_t batch, std::size_t k,
                  std::size_t query_from, ExpertUsage* usage);
  void collect(ParamList& out, const std::string& prefix);

  LayerNormParams ln1, ln2;
  MultiHeadAttention attention;
  SMoELayer moe;
};

/// Decoder-only SMoE transformer with one vocabulary-sized prediction head per
/// target attribute, all read at the final position.
class SMoETransformer {
 public:
  explicit SMoETransformer(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  /// Logits [batch*num_outputs x vocab]; row b*num_outputs + i is head i of
  /// sequence b. kTrain routes with k_train, kInfer with the inference k.
  /// Throws InputError for token ids outside the vocabulary.
  nn::Var forward(nn::Tape& tape, const TokenBatch& tokens, RoutingMode mode,
                  std::vector<ExpertUsage>* usage = nullptr);

  /// Argmax class per head: [batch][num_outputs]. Uses the inference k and
  /// does not record gradients.
  std::vector<std::vector<std::size_t>> predict(const TokenBatch& tokens);

  /// Evaluation routing; training routing (k_train) is unaffected.
  void set_inference_k(std::size_t k);
  std::size_t inference_k() const;

  ParamList parameters();
  std::vector<nn::Tensor*> parameter_tensors();
  std::size_t parameter_count();
  void zero_grad();

  std::vector<TransformerBlock>& blocks() { return blocks_; }

 private:
  void check_tokens(const TokenBatch& tokens) const;

  ModelConfig config_;
  nn::Tensor embedding_;  // [V x d]
  std::vector<TransformerBlock> blocks_;
  LayerNormParams final_norm_;
  nn::Tensor readout_;       // [d x num_outputs*V]
  nn::Tensor readout_bias_;  // [num_outputs*V]
  std::size_t k_infer_;
};

}  // namespace smoe::model
