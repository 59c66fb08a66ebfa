// SPDX-License-Identifier: Apache-2.0
#include "smoe/model/transformer.hpp"

#include <algorithm>
#include <cmath>

#include "smoe/common/error.hpp"
#include "smoe/common/rng.hpp"
#include "smoe/nn/ops.hpp"

namespace smoe::model {

LayerNormParams::LayerNormParams(std::size_t d)
    : gain(constant_param({d}, 1.0)), bias(constant_param({d}, 0.0)) {}

nn::Var LayerNormParams::forward(nn::Tape& tape, nn::Var x) {
  return nn::ops::layer_norm(tape, x, tape.parameter(gain), tape.parameter(bias));
}

void LayerNormParams::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".gain", &gain});
  out.push_back({prefix + ".bias", &bias});
}

TransformerBlock::TransformerBlock(const ModelConfig& c, Rng& rng)
    : ln1(c.d_model),
      ln2(c.d_model),
      attention(c.d_model, c.num_heads, c.rel_pos_window, c.max_seq_len, rng),
      moe(c.d_model, c.expert_hidden, c.num_experts, c.k_train, rng) {}

nn::Var TransformerBlock::forward(nn::Tape& tape, nn::Var x, std::size_t batch, std::size_t k,
                                  std::size_t query_from, ExpertUsage* usage) {
  using namespace nn::ops;
  auto attended = attention.forward(tape, ln1.forward(tape, x), batch, query_from);
  nn::Var residual = x;
  if (query_from > 0) {
    const std::size_t seq = tape.shape(x)[0] / batch;
    std::vector<std::size_t> rows;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t s = query_from; s < seq; ++s) rows.push_back(b * seq + s);
    residual = gather_rows(tape, x, rows);
  }
  auto h = add(tape, residual, attended);
  return add(tape, h, moe.forward(tape, ln2.forward(tape, h), k, usage));
}

void TransformerBlock::collect(ParamList& out, const std::string& prefix) {
  ln1.collect(out, prefix + ".ln1");
  attention.collect(out, prefix + ".attn");
  ln2.collect(out, prefix + ".ln2");
  moe.collect(out, prefix + ".moe");
}

namespace {
Rng init_rng(const ModelConfig& c) {
  c.validate();
  return Rng(derive_seed(c.seed, "init"));
}
}  // namespace

SMoETransformer::SMoETransformer(ModelConfig config)
    : config_(config), final_norm_(config.d_model), k_infer_(config.k_train) {
  Rng rng = init_rng(config_);
  embedding_ = normal_param({config_.vocab_size, config_.d_model}, 1.0, rng);
  blocks_.reserve(config_.num_blocks);
  for (std::size_t i = 0; i < config_.num_blocks; ++i) blocks_.emplace_back(config_, rng);
  readout_ = normal_param({config_.d_model, config_.num_outputs * config_.vocab_size},
                          1.0 / std::sqrt(static_cast<double>(config_.d_model)), rng);
  readout_bias_ = constant_param({config_.num_outputs * config_.vocab_size}, 0.0);
}

void SMoETransformer::check_tokens(const TokenBatch& tokens) const {
  if (tokens.batch == 0 || tokens.seq == 0 || tokens.ids.size() != tokens.batch * tokens.seq) {
    throw ContractViolation("token batch has inconsistent dimensions");
  }
  if (tokens.seq > config_.max_seq_len) {
    throw ConfigError("sequence length " + std::to_string(tokens.seq) + " exceeds max_seq_len " +
                      std::to_string(config_.max_seq_len));
  }
  for (auto id : tokens.ids) {
    if (id >= config_.vocab_size) {
      throw InputError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(config_.vocab_size));
    }
  }
}

nn::Var SMoETransformer::forward(nn::Tape& tape, const TokenBatch& tokens, RoutingMode mode,
                                 std::vector<ExpertUsage>* usage) {
  using namespace nn::ops;
  check_tokens(tokens);
  if (usage) usage->resize(blocks_.size());
  const std::size_t last = tokens.seq - 1;
  auto x = embedding(tape, tape.parameter(embedding_), tokens.ids);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto& block = blocks_[i];
    const std::size_t k = mode == RoutingMode::kTrain ? block.moe.k_train() : block.moe.k_infer();
    // Only the final position feeds the prediction heads, so the last block
    // computes queries, mixture and residual for that position alone.
    const std::size_t query_from = (i + 1 == blocks_.size()) ? last : 0;
    x = block.forward(tape, x, tokens.batch, k, query_from, usage ? &(*usage)[i] : nullptr);
  }
  if (blocks_.empty()) {
    std::vector<std::size_t> rows(tokens.batch);
    for (std::size_t b = 0; b < tokens.batch; ++b) rows[b] = b * tokens.seq + last;
    x = gather_rows(tape, x, rows);
  }
  auto h = final_norm_.forward(tape, x);
  auto logits = add_bias(tape, matmul(tape, h, tape.parameter(readout_)),
                         tape.parameter(readout_bias_));
  return reshape(tape, logits, {tokens.batch * config_.num_outputs, config_.vocab_size});
}

std::vector<std::vector<std::size_t>> SMoETransformer::predict(const TokenBatch& tokens) {
  nn::Tape tape(/*record_gradients=*/false);
  const auto& logits = tape.value(forward(tape, tokens, RoutingMode::kInfer));
  const std::size_t v = config_.vocab_size;
  std::vector<std::vector<std::size_t>> out(tokens.batch,
                                            std::vector<std::size_t>(config_.num_outputs));
  for (std::size_t b = 0; b < tokens.batch; ++b) {
    for (std::size_t i = 0; i < config_.num_outputs; ++i) {
      const auto row = logits.data().subspan((b * config_.num_outputs + i) * v, v);
      out[b][i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
  }
  return out;
}

void SMoETransformer::set_inference_k(std::size_t k) {
  if (k < 1 || k > config_.num_experts) {
    throw ConfigError("inference k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(config_.num_experts) + "]");
  }
  for (auto& block : blocks_) block.moe.set_k_infer(k);
  k_infer_ = k;
}

std::size_t SMoETransformer::inference_k() const { return k_infer_; }

ParamList SMoETransformer::parameters() {
  ParamList out;
  out.push_back({"embedding", &embedding_});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect(out, "block" + std::to_string(i));
  }
  final_norm_.collect(out, "final_norm");
  out.push_back({"readout", &readout_});
  out.push_back({"readout_bias", &readout_bias_});
  return out;
}

std::vector<nn::Tensor*> SMoETransformer::parameter_tensors() {
  std::vector<nn::Tensor*> out;
  for (auto& p : parameters()) out.push_back(p.tensor);
  return out;
}

std::size_t SMoETransformer::parameter_count() {
  std::size_t n = 0;
  for (auto& p : parameters()) n += p.tensor->numel();
  return n;
}

void SMoETransformer::zero_grad() {
  for (auto& p : parameters()) p.tensor->zero_grad();
}

}  // namespace smoe::model
