// SPDX-License-Identifier: Apache-2.0
#include "smoe/exp/runner.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "smoe/common/format.hpp"

namespace smoe::exp {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSummaryCsv = "sweep_summary.csv";
constexpr const char* kSummaryJson = "sweep_summary.json";

std::string failure_filename(const std::string& config_hash, std::uint64_t seed) {
  return "failed_" + config_hash + "_" + std::to_string(seed) + ".json";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void log_line(const RunOptions& options, const std::string& line) {
  if (options.log) *options.log << line << std::endl;
}

nlohmann::json mean_se_json(const MeanSe& v) {
  nlohmann::json j{{"mean", v.mean}};
  if (v.std_error) j["std_error"] = *v.std_error;
  return j;
}

CellFailure failure_for(const trainer::TrainConfig& cell, const std::string& error) {
  return {cell.num_attributes, cell.model.k_train, cell.seed, trainer::config_hash(cell), error};
}

void write_failure(const CellFailure& f, const trainer::TrainConfig& cell, const fs::path& dir) {
  const nlohmann::json j{{"config_hash", f.config_hash}, {"seed", f.seed}, {"config", cell},
                         {"error", f.error}};
  write_text(dir / failure_filename(f.config_hash, f.seed), j.dump(2) + "\n");
}

CellFailure read_failure(const fs::path& path) {
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    const auto cfg = j.at("config").get<trainer::TrainConfig>();
    return {cfg.num_attributes, cfg.model.k_train, j.at("seed").get<std::uint64_t>(),
            j.at("config_hash").get<std::string>(), j.at("error").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed failure record " + path.string() + ": " + e.what());
  }
}

// Runs one cell in-process; the record or a failure file lands in dir.
std::optional<CellFailure> run_cell(const trainer::TrainConfig& cell, const fs::path& dir) {
  try {
    const auto record = trainer::train(cell);
    write_run(record, dir);
    fs::remove(dir / failure_filename(record.config_hash, record.seed));
    return std::nullopt;
  } catch (const std::exception& e) {
    auto failure = failure_for(cell, e.what());
    write_failure(failure, cell, dir);
    return failure;
  }
}

void write_summary_files(const SweepSummary& summary, const fs::path& dir) {
  std::ostringstream csv;
  write_summary_csv(csv, summary);
  write_text(dir / kSummaryCsv, csv.str());
  write_text(dir / kSummaryJson, summary_to_json(summary).dump(2) + "\n");
}

int run_train(const ExperimentConfig& config, const fs::path& dir, const RunOptions& options) {
  trainer::Trainer trainer(*config.train);
  const std::size_t every = std::max<std::size_t>(1, config.train->steps / 20);
  trainer.on_step = [&](std::size_t step, double loss) {
    if (step % every == 0) log_line(options, "step " + std::to_string(step) + " loss " + std::to_string(loss));
  };
  const auto record = trainer.run();
  const auto path = write_run(record, dir);
  log_line(options, "wrote " + path.string() + " test_acc=" + std::to_string(record.test_acc) +
                        " ood_acc=" + std::to_string(record.ood_acc));
  return kExitOk;
}

int run_sweep(const ExperimentConfig& config, const fs::path& dir, const RunOptions& options) {
  auto cells = expand_sweep(config.train.value_or(trainer::TrainConfig{}), *config.sweep);
  const auto all_cells = cells;
  if (options.resume) {
    std::erase_if(cells, [&](const trainer::TrainConfig& cell) {
      return fs::exists(dir / run_filename(trainer::config_hash(cell), cell.seed));
    });
    log_line(options, std::to_string(all_cells.size() - cells.size()) + " cells already recorded");
  }
  std::vector<CellFailure> failures;
  const std::size_t jobs = std::max<std::size_t>(1, options.jobs);

  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      log_line(options, "cell " + std::to_string(i + 1) + "/" + std::to_string(cells.size()) +
                            " M=" + std::to_string(cells[i].num_attributes) +
                            " k_train=" + std::to_string(cells[i].model.k_train) +
                            " seed=" + std::to_string(cells[i].seed));
      if (auto f = run_cell(cells[i], dir)) failures.push_back(std::move(*f));
    }
  } else {
    std::map<pid_t, std::size_t> running;
    auto reap_one = [&] {
      int status = 0;
      const pid_t pid = ::wait(&status);
      if (pid <= 0) return;
      const std::size_t i = running.at(pid);
      running.erase(pid);
      const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
      if (ok) return;
      const auto& cell = cells[i];
      const auto fpath = dir / failure_filename(trainer::config_hash(cell), cell.seed);
      if (fs::exists(fpath)) {
        failures.push_back(read_failure(fpath));
      } else {
        auto f = failure_for(cell, WIFSIGNALED(status)
                                       ? "worker killed by signal " + std::to_string(WTERMSIG(status))
                                       : "worker exited with status " + std::to_string(WEXITSTATUS(status)));
        write_failure(f, cell, dir);
        failures.push_back(std::move(f));
      }
    };
    for (std::size_t i = 0; i < cells.size(); ++i) {
      while (running.size() >= jobs) reap_one();
      if (options.log) options.log->flush();
      std::fflush(nullptr);
      const pid_t pid = ::fork();
      if (pid < 0) throw InputError("fork failed while launching sweep cell");
      if (pid == 0) {
        const bool failed = run_cell(cells[i], dir).has_value();
        std::_Exit(failed ? kExitPartialSweep : kExitOk);
      }
      running.emplace(pid, i);
      log_line(options, "launched cell " + std::to_string(i + 1) + "/" + std::to_string(cells.size()));
    }
    while (!running.empty()) reap_one();
  }

  std::vector<trainer::RunRecord> records;
  for (const auto& cell : all_cells) {
    const auto path = dir / run_filename(trainer::config_hash(cell), cell.seed);
    if (fs::exists(path) && !fs::exists(dir / failure_filename(trainer::config_hash(cell), cell.seed))) {
      records.push_back(read_run(path));
    }
  }
  const auto summary = summarize(records, failures);
  write_summary_files(summary, dir);
  log_line(options, "sweep finished: " + std::to_string(records.size()) + " cells ok, " +
                        std::to_string(failures.size()) + " failed");
  return failures.empty() ? kExitOk : kExitPartialSweep;
}

}  // namespace

MeanSe mean_and_se(std::span<const double> values) {
  if (values.empty()) throw ConfigError("mean_and_se: no values");
  const auto n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  MeanSe out{mean, std::nullopt};
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    out.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

SweepSummary summarize(std::span<const trainer::RunRecord> records, std::vector<CellFailure> failures) {
  SweepSummary summary;
  for (const auto& r : records) {
    summary.rows.push_back({r.config.num_attributes, r.config.model.k_train, r.seed, r.config_hash,
                            r.test_acc, r.ood_acc, r.per_k_eval});
  }
  std::sort(summary.rows.begin(), summary.rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.M, a.k_train, a.seed, a.config_hash) < std::tie(b.M, b.k_train, b.seed, b.config_hash);
  });
  std::map<std::pair<std::size_t, std::size_t>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& row : summary.rows) {
    auto& g = groups[{row.M, row.k_train}];
    g.first.push_back(row.test_acc);
    g.second.push_back(row.ood_acc);
  }
  for (const auto& [key, values] : groups) {
    summary.aggregates.push_back({key.first, key.second, values.first.size(),
                                  mean_and_se(values.first), mean_and_se(values.second)});
  }
  std::sort(failures.begin(), failures.end(), [](const CellFailure& a, const CellFailure& b) {
    return std::tie(a.M, a.k_train, a.seed, a.config_hash) < std::tie(b.M, b.k_train, b.seed, b.config_hash);
  });
  summary.failures = std::move(failures);
  return summary;
}

void write_summary_csv(std::ostream& out, const SweepSummary& summary) {
  out << "M,k_train,seed,test_acc,ood_acc\n";
  for (const auto& r : summary.rows) {
    out << r.M << ',' << r.k_train << ',' << r.seed << ',' << format_double(r.test_acc) << ','
        << format_double(r.ood_acc) << '\n';
  }
}

nlohmann::json summary_to_json(const SweepSummary& summary) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : summary.rows) {
    nlohmann::json table = nlohmann::json::array();
    for (const auto& e : r.k_eval) table.push_back({{"k", e.k}, {"test_acc", e.test_acc}, {"ood_acc", e.ood_acc}});
    rows.push_back({{"M", r.M}, {"k_train", r.k_train}, {"seed", r.seed}, {"config_hash", r.config_hash},
                    {"test_acc", r.test_acc}, {"ood_acc", r.ood_acc}, {"k_eval", table}});
  }
  nlohmann::json aggregates = nlohmann::json::array();
  for (const auto& a : summary.aggregates) {
    aggregates.push_back({{"M", a.M}, {"k_train", a.k_train}, {"num_seeds", a.num_seeds},
                          {"test_acc", mean_se_json(a.test_acc)}, {"ood_acc", mean_se_json(a.ood_acc)}});
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : summary.failures) {
    failures.push_back({{"M", f.M}, {"k_train", f.k_train}, {"seed", f.seed},
                        {"config_hash", f.config_hash}, {"error", f.error}});
  }
  return {{"rows", rows}, {"aggregates", aggregates}, {"failures", failures}};
}

std::string run_filename(const std::string& config_hash, std::uint64_t seed) {
  return "run_" + config_hash + "_" + std::to_string(seed) + ".json";
}

fs::path write_run(const trainer::RunRecord& record, const fs::path& dir) {
  fs::create_directories(dir);
  const auto path = dir / run_filename(record.config_hash, record.seed);
  write_text(path, nlohmann::json(record).dump(2) + "\n");
  std::ostringstream csv;
  trainer::write_curve_csv(csv, record);
  write_text(dir / ("curve_" + record.config_hash + "_" + std::to_string(record.seed) + ".csv"), csv.str());
  return path;
}

trainer::RunRecord read_run(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path)).get<trainer::RunRecord>();
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("malformed run record " + path.string() + ": " + e.what());
  }
}

SweepSummary aggregate(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw NoDataError("no such results directory: " + dir.string());
  std::vector<fs::path> runs;
  std::vector<fs::path> failed;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() != ".json") continue;
    if (name.rfind("run_", 0) == 0) runs.push_back(entry.path());
    else if (name.rfind("failed_", 0) == 0) failed.push_back(entry.path());
  }
  if (runs.empty()) throw NoDataError("no run records in " + dir.string());
  std::sort(runs.begin(), runs.end());
  std::sort(failed.begin(), failed.end());
  std::vector<trainer::RunRecord> records;
  for (const auto& p : runs) records.push_back(read_run(p));
  std::vector<CellFailure> failures;
  for (const auto& p : failed) failures.push_back(read_failure(p));
  auto summary = summarize(records, std::move(failures));
  write_summary_files(summary, dir);
  return summary;
}

ExperimentConfig apply_overrides(ExperimentConfig config, const RunOptions& options) {
  if (options.output_dir) config.output_dir = *options.output_dir;
  if (options.seed) {
    if (config.train) config.train->seed = *options.seed;
    if (config.sweep) config.sweep->seeds = {*options.seed};
  }
  config.validate();
  return config;
}

std::vector<fs::path> run_theory(std::span<const theory::ErrorModelParams> sets, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  std::ostringstream table;
  table << "params_hash,N,T,d_N,m,c1,c2,delta,variant,k_star,k_star_continuous\n";
  for (const auto& p : sets) {
    const std::string hash = theory::params_hash(p);
    std::ostringstream csv;
    theory::write_error_curve_csv(csv, p);
    const auto path = dir / ("theory_" + hash + ".csv");
    write_text(path, csv.str());
    written.push_back(path);

    const auto best = theory::optimal_k(p);
    table << hash << ',' << p.N << ',' << p.T << ',' << format_double(p.d_N) << ',' << p.m << ','
          << format_double(p.c1) << ',' << format_double(p.c2) << ',' << format_double(p.delta) << ',' << theory::variant_name(p.variant) << ',' << best.k_star << ',';
    if (p.variant == theory::EstimationVariant::kTheoremConsistent && p.T >= 2 && p.c1 > 0.0 && p.c2 > 0.0) {
      table << format_double(theory::optimal_k_continuous(p));
    }
    table << '\n';
  }
  const auto summary = dir / "theory_kstar.csv";
  write_text(summary, table.str());
  written.push_back(summary);
  return written;
}

int run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  switch (config.kind) {
    case ExperimentKind::kTrain:
      return run_train(config, dir, options);
    case ExperimentKind::kSweep:
      return run_sweep(config, dir, options);
    case ExperimentKind::kTheory:
      for (const auto& p : run_theory(config.theory, dir)) log_line(options, "wrote " + p.string());
      return kExitOk;
  }
  return kExitFailure;
}

}  // namespace smoe::exp
