// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include <json.hpp>

namespace smoe::model {

/// Hyperparameters of the SMoE transformer. Defaults are desk-scale: two
/// blocks, 8 homogeneous experts, top-2 routing at train time.
struct ModelConfig {
  std::size_t d_model = 128;
  std::size_t num_heads = 4;
  std::size_t num_blocks = 2;
  std::size_t num_experts = 8;  // T
  std::size_t k_train = 2;
  std::size_t expert_hidden = 256;
  std::size_t vocab_size = 13;
  std::size_t max_seq_len = 64;
  std::size_t rel_pos_window = 16;
  std::size_t num_outputs = 1;  // prediction heads read at the final position (M)
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace smoe::model
