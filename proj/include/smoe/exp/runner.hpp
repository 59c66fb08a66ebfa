// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smoe/exp/config.hpp"
#include "smoe/trainer/trainer.hpp"

namespace smoe::exp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPartialSweep = 3;
inline constexpr int kExitNoData = 4;

struct MeanSe {
  double mean = 0.0;
  std::optional<double> std_error;  // absent for a single value
};

/// Sample mean and standard error (n-1 denominator). ConfigError when empty.
MeanSe mean_and_se(std::span<const double> values);

struct SweepRow {
  std::size_t M = 0;
  std::size_t k_train = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  double test_acc = 0.0;
  double ood_acc = 0.0;
  std::vector<trainer::KEval> k_eval;
};

struct SweepAggregate {
  std::size_t M = 0;
  std::size_t k_train = 0;
  std::size_t num_seeds = 0;
  MeanSe test_acc;
  MeanSe ood_acc;
};

struct CellFailure {
  std::size_t M = 0;
  std::size_t k_train = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string error;
};

struct SweepSummary {
  std::vector<SweepRow> rows;              // sorted by (M, k_train, seed, hash)
  std::vector<SweepAggregate> aggregates;  // one per (M, k_train) with rows
  std::vector<CellFailure> failures;
};

/// Rows and per-(M, k_train) aggregates of the given records.
SweepSummary summarize(std::span<const trainer::RunRecord> records,
                       std::vector<CellFailure> failures = {});

/// Header M,k_train,seed,test_acc,ood_acc, one line per row.
void write_summary_csv(std::ostream& out, const SweepSummary& summary);
nlohmann::json summary_to_json(const SweepSummary& summary);

/// run_<confighash>_<seed>.json
std::string run_filename(const std::string& config_hash, std::uint64_t seed);
/// Writes the record JSON and its curve CSV; returns the JSON path.
std::filesystem::path write_run(const trainer::RunRecord& record, const std::filesystem::path& dir);
trainer::RunRecord read_run(const std::filesystem::path& path);

/// Recomputes the summary from every run_*.json (and failed_*.json) in dir and
/// writes sweep_summary.csv / sweep_summary.json there. NoDataError when the
/// directory holds no run record.
SweepSummary aggregate(const std::filesystem::path& dir);

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;  // overrides the config
  std::optional<std::uint64_t> seed;                // overrides train / sweep seeds
  std::size_t jobs = 1;                             // sweep worker processes
  bool resume = false;                              // skip sweep cells with a run record
  std::ostream* log = nullptr;                      // progress lines
};

/// Config with command-line overrides applied, validated again.
ExperimentConfig apply_overrides(ExperimentConfig config, const RunOptions& options);

/// Runs a validated experiment and returns the process exit code.
int run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Writes theory_<paramhash>.csv per parameter set plus theory_kstar.csv.
/// Returns the paths written.
std::vector<std::filesystem::path> run_theory(std::span<const theory::ErrorModelParams> sets,
                                              const std::filesystem::path& dir);

}  // namespace smoe::exp
