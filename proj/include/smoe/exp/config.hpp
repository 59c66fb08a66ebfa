// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "smoe/common/error.hpp"
#include "smoe/theory/theory.hpp"
#include "smoe/trainer/trainer.hpp"

namespace smoe::exp {

enum class ExperimentKind { kTrain, kSweep, kTheory };

std::string kind_name(ExperimentKind kind);

/// Cross product of difficulties, training k and seeds.
struct SweepSpec {
  std::vector<std::size_t> M_list;
  std::vector<std::size_t> k_list;
  std::vector<std::uint64_t> seeds;
  bool operator==(const SweepSpec&) const = default;
};

/// One experiment document. For kSweep, `train` is the base config every cell
/// starts from (M, k_train and seed are then overridden per cell).
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kTrain;
  std::optional<trainer::TrainConfig> train;
  std::optional<SweepSpec> sweep;
  std::vector<theory::ErrorModelParams> theory;
  std::filesystem::path output_dir = "results";

  /// ConfigError unless exactly the kind's payload is present and valid.
  void validate() const;
};

/// ConfigError carrying the 1-based line of the offending key (0 if unknown).
/// what() reads "source:line: detail", or "line N: detail" without a source.
class ConfigLocationError : public ConfigError {
 public:
  ConfigLocationError(std::size_t line, const std::string& detail, const std::string& source = {});
  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

/// Maps dotted key paths ("train.model.d_model", "theory[1].N") to the line
/// where the key appears in the JSON text.
class KeyLocator {
 public:
  explicit KeyLocator(std::string_view text);
  /// Line of the longest recorded path under `scope` that ends with a dotted
  /// name mentioned in `message`; the line of `scope` itself otherwise.
  std::size_t locate(std::string_view message, std::string_view scope = {}) const;
  const std::vector<std::pair<std::string, std::size_t>>& keys() const { return keys_; }

 private:
  std::vector<std::pair<std::string, std::size_t>> keys_;
};

/// Parses and validates a config document; errors are ConfigLocationError.
ExperimentConfig parse_experiment(std::string_view text);
/// Reads and parses a file. InputError when it cannot be read.
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Cells of a sweep in (M, k, seed) order, each a full TrainConfig.
std::vector<trainer::TrainConfig> expand_sweep(const trainer::TrainConfig& base, const SweepSpec& sweep);

}  // namespace smoe::exp
