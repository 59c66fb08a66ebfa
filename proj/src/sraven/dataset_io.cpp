// SPDX-License-Identifier: Apache-2.0
#include "smoe/sraven/dataset_io.hpp"

#include <istream>
#include <ostream>

#include "smoe/common/error.hpp"

namespace smoe::sraven {

nlohmann::json instance_to_json(const SravenInstance& instance) {
  nlohmann::json tuple = nlohmann::json::array();
  for (Rule r : instance.tuple) tuple.push_back(std::string(rule_name(r)));
  nlohmann::json context = nlohmann::json::array();
  for (const auto& panel : instance.context) context.push_back(panel);
  return {{"tuple", tuple}, {"context", context}, {"target", instance.target}};
}

SravenInstance instance_from_json(const nlohmann::json& j) {
  try {
    SravenInstance inst;
    for (const auto& name : j.at("tuple")) inst.tuple.push_back(rule_from_name(name.get<std::string>()));
    const auto& ctx = j.at("context");
    if (!ctx.is_array() || ctx.size() != kContextPanels) throw InputError("context must hold 8 panels");
    for (std::size_t i = 0; i < kContextPanels; ++i) inst.context[i] = ctx[i].get<Panel>();
    inst.target = j.at("target").get<Panel>();
    for (const auto& panel : inst.context) {
      if (panel.size() != inst.tuple.size()) throw InputError("panel width differs from tuple length");
    }
    if (inst.target.size() != inst.tuple.size()) throw InputError("target width differs from tuple length");
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed SRAVEN instance: ") + e.what());
  }
}

void write_dataset(std::ostream& out, const DatasetHeader& header,
                   const std::vector<SravenInstance>& instances) {
  out << nlohmann::json{{"p", header.p},
                        {"M", header.num_attributes},
                        {"R", header.num_rules},
                        {"seed", header.seed},
                        {"split", header.split}}
             .dump()
      << "\n";
  for (const auto& inst : instances) out << instance_to_json(inst).dump() << "\n";
}

std::vector<SravenInstance> read_dataset(std::istream& in, DatasetHeader* header) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("dataset file is empty");
  try {
    const auto h = nlohmann::json::parse(line);
    if (header) {
      header->p = h.at("p").get<int>();
      header->num_attributes = h.at("M").get<std::size_t>();
      header->num_rules = h.at("R").get<std::size_t>();
      header->seed = h.at("seed").get<std::uint64_t>();
      header->split = h.at("split").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed dataset header: ") + e.what());
  }
  std::vector<SravenInstance> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(instance_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(std::string("malformed dataset line: ") + e.what());
    }
  }
  return out;
}

}  // namespace smoe::sraven
