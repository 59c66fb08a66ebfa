// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "smoe/exp/runner.hpp"

namespace {

using smoe::exp::ExperimentKind;

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 0;
  bool resume = false;
};

int run_kind(ExperimentKind expected, const Flags& flags) {
  auto config = smoe::exp::load_experiment(flags.config);
  if (config.kind != expected) {
    throw smoe::ConfigError(flags.config + ": config kind is " + smoe::exp::kind_name(config.kind) +
                            ", expected " + smoe::exp::kind_name(expected));
  }
  smoe::exp::RunOptions options;
  if (!flags.out.empty()) options.output_dir = flags.out;
  else if (auto dir = env("SMOE_OUTPUT_DIR")) options.output_dir = *dir;
  options.seed = flags.seed;
  options.jobs = flags.jobs;
  if (options.jobs == 0) options.jobs = env("SMOE_JOBS") ? std::stoul(*env("SMOE_JOBS")) : 1;
  options.resume = flags.resume;
  options.log = &std::cerr;
  return smoe::exp::run_experiment(smoe::exp::apply_overrides(std::move(config), options), options);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse mixture-of-experts experiments: training runs, sweeps, theory curves."};
  app.require_subcommand(1);

  Flags flags;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "Output directory (overrides config and SMOE_OUTPUT_DIR)");
  };
  auto* train = app.add_subcommand("train", "Run one training job");
  add_common(train);
  auto* train_seed = train->add_option("--seed", seed, "Override the config seed");
  auto* sweep = app.add_subcommand("sweep", "Run the M x k_train x seed cross product");
  add_common(sweep);
  auto* sweep_seed = sweep->add_option("--seed", seed, "Run only this seed");
  sweep->add_option("--jobs", flags.jobs, "Parallel worker processes (default SMOE_JOBS or 1)");
  sweep->add_flag("--resume", flags.resume, "Skip cells that already have a run record");
  auto* theory = app.add_subcommand("theory", "Write error-model curves and k* tables");
  add_common(theory);
  auto* aggregate = app.add_subcommand("aggregate", "Recompute the sweep summary from run records");
  std::string agg_dir;
  aggregate->add_option("--out,dir", agg_dir, "Results directory (default SMOE_OUTPUT_DIR)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : smoe::exp::kExitConfig;
  }

  try {
    if (*train_seed || *sweep_seed) flags.seed = seed;
    if (train->parsed()) return run_kind(ExperimentKind::kTrain, flags);
    if (sweep->parsed()) return run_kind(ExperimentKind::kSweep, flags);
    if (theory->parsed()) return run_kind(ExperimentKind::kTheory, flags);
    if (agg_dir.empty()) agg_dir = env("SMOE_OUTPUT_DIR").value_or("results");
    const auto summary = smoe::exp::aggregate(agg_dir);
    std::cerr << "aggregated " << summary.rows.size() << " records into " << agg_dir << "\n";
    return smoe::exp::kExitOk;
  } catch (const smoe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return smoe::exp::kExitConfig;
  } catch (const smoe::NoDataError& e) {
    std::cerr << "no data: " << e.what() << "\n";
    return smoe::exp::kExitNoData;
  } catch (const smoe::trainer::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& [name, norm] : e.parameter_norms()) std::cerr << "  " << name << " norm " << norm << "\n";
    return smoe::exp::kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return smoe::exp::kExitFailure;
  }
}
