// SPDX-License-Identifier: Apache-2.0
#include "smoe/sraven/sraven.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "smoe/common/error.hpp"

namespace smoe::sraven {

namespace {

constexpr std::array<std::string_view, kMaxRules> kRuleNames = {"CONST", "INC1", "INC2", "DEC1",
                                                                "ADD",   "SUB",  "MAX",  "MIN"};

int mod(int value, int p) {
  const int r = value % p;
  return r < 0 ? r + p : r;
}

void check_tuple(const RuleTuple& tuple) {
  if (tuple.empty() || tuple.size() > kMaxRules) {
    throw ConfigError("rule tuple must hold between 1 and 8 rules");
  }
  for (std::size_t i = 0; i < tuple.size(); ++i)
    for (std::size_t j = i + 1; j < tuple.size(); ++j)
      if (tuple[i] == tuple[j]) throw ConfigError("rule tuple repeats a rule");
}

void enumerate(std::size_t num_rules, std::size_t depth, RuleTuple& prefix,
               std::vector<bool>& used, std::vector<RuleTuple>& out) {
  if (prefix.size() == depth) {
    out.push_back(prefix);
    return;
  }
  for (std::size_t id = 0; id < num_rules; ++id) {
    if (used[id]) continue;
    used[id] = true;
    prefix.push_back(static_cast<Rule>(id));
    enumerate(num_rules, depth, prefix, used, out);
    prefix.pop_back();
    used[id] = false;
  }
}

}  // namespace

std::string_view rule_name(Rule rule) { return kRuleNames.at(static_cast<std::size_t>(rule)); }

Rule rule_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kRuleNames.size(); ++i) {
    if (kRuleNames[i] == name) return static_cast<Rule>(i);
  }
  throw ConfigError("unknown rule name '" + std::string(name) + "'");
}

Rule rule_from_id(std::size_t id) {
  if (id >= kMaxRules) throw ConfigError("rule id " + std::to_string(id) + " outside [0, 8)");
  return static_cast<Rule>(id);
}

std::vector<RuleTuple> enumerate_rule_tuples(std::size_t num_rules, std::size_t num_attributes) {
  if (num_rules < 1 || num_rules > kMaxRules) throw ConfigError("R must be in [1, 8]");
  if (num_attributes < 1 || num_attributes > num_rules) {
    throw ConfigError("M=" + std::to_string(num_attributes) + " must be in [1, R=" +
                      std::to_string(num_rules) + "]");
  }
  std::vector<RuleTuple> out;
  RuleTuple prefix;
  std::vector<bool> used(num_rules, false);
  enumerate(num_rules, num_attributes, prefix, used, out);
  return out;
}

SplitSpec split_combinations(std::vector<RuleTuple> tuples, double ood_fraction,
                             std::uint64_t seed) {
  if (tuples.size() < 2) throw ConfigError("split needs at least 2 rule tuples");
  if (!(ood_fraction > 0.0 && ood_fraction < 1.0)) {
    throw ConfigError("ood_fraction must lie strictly between 0 and 1");
  }
  const auto n = static_cast<long>(tuples.size());
  const long held_out = std::clamp(std::lround(ood_fraction * static_cast<double>(n)), 1L, n - 1);
  Rng rng(derive_seed(seed, "split"));
  std::shuffle(tuples.begin(), tuples.end(), rng);

  SplitSpec split;
  split.ood_fraction = ood_fraction;
  split.seed = seed;
  split.ood_tuples.assign(tuples.begin(), tuples.begin() + held_out);
  split.train_tuples.assign(tuples.begin() + held_out, tuples.end());
  return split;
}

std::array<int, 3> make_row(Rule rule, int a1, int a2, int p) {
  switch (rule) {
    case Rule::kConst: return {a1, a1, a1};
    case Rule::kInc1: return {a1, mod(a1 + 1, p), mod(a1 + 2, p)};
    case Rule::kInc2: return {a1, mod(a1 + 2, p), mod(a1 + 4, p)};
    case Rule::kDec1: return {a1, mod(a1 - 1, p), mod(a1 - 2, p)};
    case Rule::kAdd: return {a1, a2, mod(a1 + a2, p)};
    case Rule::kSub: return {a1, a2, mod(a1 - a2, p)};
    case Rule::kMax: return {a1, a2, std::max(a1, a2)};
    case Rule::kMin: return {a1, a2, std::min(a1, a2)};
  }
  throw ConfigError("invalid rule");
}

SravenInstance sample_instance(const RuleTuple& tuple, int p, Rng& rng) {
  if (p < 4) throw ConfigError("value range p must be at least 4, got " + std::to_string(p));
  check_tuple(tuple);
  const std::size_t m = tuple.size();
  std::uniform_int_distribution<int> value(0, p - 1);

  std::array<Panel, 9> grid;
  for (auto& panel : grid) panel.assign(m, 0);
  for (std::size_t row = 0; row < 3; ++row) {
    for (std::size_t attr = 0; attr < m; ++attr) {
      const int a1 = value(rng);
      const int a2 = value(rng);
      const auto cells = make_row(tuple[attr], a1, a2, p);
      for (std::size_t col = 0; col < 3; ++col) grid[row * 3 + col][attr] = cells[col];
    }
  }
  SravenInstance inst;
  std::copy_n(grid.begin(), kContextPanels, inst.context.begin());
  inst.target = grid[8];
  inst.tuple = tuple;
  return inst;
}

std::vector<SravenInstance> sample_snapshot(std::span<const RuleTuple> tuples, std::size_t count,
                                            int p, std::uint64_t seed) {
  if (tuples.empty()) throw ConfigError("snapshot needs at least one rule tuple");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, tuples.size() - 1);
  std::vector<SravenInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_instance(tuples[pick(rng)], p, rng));
  return out;
}

std::vector<std::size_t> encode(const SravenInstance& instance, int p) {
  const Vocabulary vocab{p};
  std::vector<std::size_t> tokens;
  tokens.reserve(encoded_length(instance.num_attributes()));
  tokens.push_back(vocab.bos());
  for (const auto& panel : instance.context) {
    for (int v : panel) tokens.push_back(static_cast<std::size_t>(v));
    tokens.push_back(vocab.sep());
  }
  tokens.push_back(vocab.query());
  return tokens;
}

std::array<Panel, kContextPanels> decode(std::span<const std::size_t> tokens,
                                         std::size_t num_attributes, int p) {
  const Vocabulary vocab{p};
  if (tokens.size() != encoded_length(num_attributes) || tokens.front() != vocab.bos() ||
      tokens.back() != vocab.query()) {
    throw InputError("token sequence is not an encoded SRAVEN instance");
  }
  std::array<Panel, kContextPanels> panels;
  std::size_t pos = 1;
  for (auto& panel : panels) {
    panel.resize(num_attributes);
    for (auto& v : panel) {
      if (tokens[pos] >= static_cast<std::size_t>(p)) throw InputError("expected a value token");
      v = static_cast<int>(tokens[pos++]);
    }
    if (tokens[pos++] != vocab.sep()) throw InputError("expected a separator token");
  }
  return panels;
}

double exact_match_accuracy(std::span<const Panel> predictions, std::span<const Panel> targets) {
  if (predictions.size() != targets.size() || predictions.empty()) {
    throw ContractViolation("exact_match_accuracy: " + std::to_string(predictions.size()) +
                            " predictions for " + std::to_string(targets.size()) + " targets");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (predictions[i].size() != targets[i].size()) {
      throw ContractViolation("exact_match_accuracy: width mismatch at row " + std::to_string(i));
    }
    if (predictions[i] == targets[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(targets.size());
}

}  // namespace smoe::sraven
