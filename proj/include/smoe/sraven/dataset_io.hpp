// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "smoe/sraven/sraven.hpp"

namespace smoe::sraven {

struct DatasetHeader {
  int p = 10;
  std::size_t num_attributes = 1;  // M
  std::size_t num_rules = kMaxRules;  // R
  std::uint64_t seed = 0;
  std::string split;  // "train", "test" or "ood"
};

nlohmann::json instance_to_json(const SravenInstance& instance);
SravenInstance instance_from_json(const nlohmann::json& j);

/// JSON lines: the header object first, then one {tuple, context, target}
/// object per instance.
void write_dataset(std::ostream& out, const DatasetHeader& header,
                   const std::vector<SravenInstance>& instances);
std::vector<SravenInstance> read_dataset(std::istream& in, DatasetHeader* header = nullptr);

}  // namespace smoe::sraven
