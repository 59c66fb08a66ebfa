// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "smoe/common/rng.hpp"

namespace smoe::sraven {

/// Row rules of the 3x3 grid. Each attribute of a panel follows one rule along
/// every row (a1, a2, a3), all arithmetic mod p:
///   CONST a1=a2=a3      INC1 step +1     INC2 step +2     DEC1 step -1
///   ADD   a3=a1+a2      SUB  a3=a1-a2    MAX  a3=max      MIN  a3=min
enum class Rule : std::uint8_t { kConst, kInc1, kInc2, kDec1, kAdd, kSub, kMax, kMin };

inline constexpr std::size_t kMaxRules = 8;
inline constexpr std::size_t kContextPanels = 8;

std::string_view rule_name(Rule rule);
/// Throws ConfigError for an unknown name.
Rule rule_from_name(std::string_view name);
/// Rule with id in [0, kMaxRules).
Rule rule_from_id(std::size_t id);

/// Ordered, all-distinct rules; position i governs attribute i.
using RuleTuple = std::vector<Rule>;
using Panel = std::vector<int>;

struct SravenInstance {
  std::array<Panel, kContextPanels> context;  // row-major, bottom-right panel missing
  Panel target;
  RuleTuple tuple;

  std::size_t num_attributes() const { return tuple.size(); }
  bool operator==(const SravenInstance&) const = default;
};

struct SplitSpec {
  std::vector<RuleTuple> train_tuples;
  std::vector<RuleTuple> ood_tuples;
  double ood_fraction = 0.25;
  std::uint64_t seed = 0;
};

/// All ordered M-tuples of distinct rule ids drawn from the first R rules, in
/// lexicographic order; R!/(R-M)! of them. ConfigError unless 1 <= M <= R <= 8.
std::vector<RuleTuple> enumerate_rule_tuples(std::size_t num_rules, std::size_t num_attributes);

/// Seeded shuffle then prefix split: the first round(ood_fraction * n) tuples
/// (clamped to [1, n-1]) become the held-out OOD set.
SplitSpec split_combinations(std::vector<RuleTuple> tuples, double ood_fraction, std::uint64_t seed);

/// Completes one grid row. Progression rules (CONST, INC*, DEC1) use only a1;
/// binary rules use a1 and a2.
std::array<int, 3> make_row(Rule rule, int a1, int a2, int p);

/// Samples the free row entries uniformly in [0, p). ConfigError for p < 4 or
/// an empty/duplicated tuple.
SravenInstance sample_instance(const RuleTuple& tuple, int p, Rng& rng);

/// `count` instances, each from a uniformly drawn tuple of `tuples`.
std::vector<SravenInstance> sample_snapshot(std::span<const RuleTuple> tuples, std::size_t count,
                                            int p, std::uint64_t seed);

/// Token ids: value v -> v, then BOS, SEP, QUERY.
struct Vocabulary {
  int p = 10;
  std::size_t bos() const { return static_cast<std::size_t>(p); }
  std::size_t sep() const { return static_cast<std::size_t>(p) + 1; }
  std::size_t query() const { return static_cast<std::size_t>(p) + 2; }
  std::size_t size() const { return static_cast<std::size_t>(p) + 3; }
};

/// Sequence length for M attributes: 1 + 8(M+1) + 1.
constexpr std::size_t encoded_length(std::size_t num_attributes) {
  return 2 + kContextPanels * (num_attributes + 1);
}

/// [BOS] (panel values..., SEP) x 8 [QUERY]
std::vector<std::size_t> encode(const SravenInstance& instance, int p);

/// Inverse of encode for the context panels. Throws InputError on a malformed sequence.
std::array<Panel, kContextPanels> decode(std::span<const std::size_t> tokens,
                                         std::size_t num_attributes, int p);

/// Fraction of rows where every attribute matches. ContractViolation when the
/// lists or vector widths differ; 0 rows yields ContractViolation as well.
double exact_match_accuracy(std::span<const Panel> predictions, std::span<const Panel> targets);

}  // namespace smoe::sraven
