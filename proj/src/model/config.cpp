// SPDX-License-Identifier: Apache-2.0
#include "smoe/model/config.hpp"

#include <string>

#include "smoe/common/error.hpp"

namespace smoe::model {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model.") + name + " must be positive");
  };
  positive(d_model, "d_model");
  positive(num_heads, "num_heads");
  positive(num_blocks, "num_blocks");
  positive(num_experts, "num_experts");
  positive(k_train, "k_train");
  positive(expert_hidden, "expert_hidden");
  positive(vocab_size, "vocab_size");
  positive(max_seq_len, "max_seq_len");
  positive(rel_pos_window, "rel_pos_window");
  positive(num_outputs, "num_outputs");
  if (d_model % num_heads != 0) {
    throw ConfigError("model.d_model (" + std::to_string(d_model) +
                      ") must be divisible by model.num_heads (" + std::to_string(num_heads) + ")");
  }
  if (k_train > num_experts) {
    throw ConfigError("model.k_train (" + std::to_string(k_train) + ") must be in [1, " +
                      std::to_string(num_experts) + "]");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"d_model", c.d_model},         {"num_heads", c.num_heads},
                     {"num_blocks", c.num_blocks},   {"num_experts", c.num_experts},
                     {"k_train", c.k_train},         {"expert_hidden", c.expert_hidden},
                     {"vocab_size", c.vocab_size},   {"max_seq_len", c.max_seq_len},
                     {"rel_pos_window", c.rel_pos_window}, {"num_outputs", c.num_outputs},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    std::size_t* field = nullptr;
    if (key == "d_model") field = &c.d_model;
    else if (key == "num_heads") field = &c.num_heads;
    else if (key == "num_blocks") field = &c.num_blocks;
    else if (key == "num_experts") field = &c.num_experts;
    else if (key == "k_train") field = &c.k_train;
    else if (key == "expert_hidden") field = &c.expert_hidden;
    else if (key == "vocab_size") field = &c.vocab_size;
    else if (key == "max_seq_len") field = &c.max_seq_len;
    else if (key == "rel_pos_window") field = &c.rel_pos_window;
    else if (key == "num_outputs") field = &c.num_outputs;
    else if (key == "seed") {
      if (!value.is_number_unsigned()) throw ConfigError("model.seed must be a non-negative integer");
      c.seed = value.get<std::uint64_t>();
      continue;
    } else {
      throw ConfigError("unknown key model." + key);
    }
    if (!value.is_number_unsigned()) throw ConfigError("model." + key + " must be a non-negative integer");
    *field = value.get<std::size_t>();
  }
}

}  // namespace smoe::model
