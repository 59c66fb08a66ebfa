// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "smoe/common/hash.hpp"
#include "smoe/exp/config.hpp"
#include "smoe/exp/runner.hpp"

using namespace smoe;
using namespace smoe::exp;
namespace fs = std::filesystem;

namespace {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("smoe_exp_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

const char* kTinyTrain = R"("train": {
    "model": {"d_model": 16, "num_heads": 2, "num_blocks": 1, "num_experts": 8,
              "expert_hidden": 16, "max_seq_len": 32, "rel_pos_window": 8},
    "steps": 4, "batch_size": 4, "eval_every": 2, "eval_instances": 16
  })";

std::string sweep_doc(const fs::path& out) {
  return std::string("{\n  \"kind\": \"SWEEP\",\n  ") + kTinyTrain +
         ",\n  \"sweep\": {\"M_list\": [1], \"k_list\": [1, 8], \"seeds\": [0]},\n  \"output_dir\": \"" +
         out.string() + "\"\n}\n";
}

trainer::RunRecord fake_record(std::size_t M, std::size_t k, std::uint64_t seed, double test, double ood) {
  trainer::RunRecord r;
  r.config.num_attributes = M;
  r.config.model.k_train = k;
  r.config.seed = seed;
  r.seed = seed;
  r.config_hash = trainer::config_hash(r.config);
  r.test_acc = test;
  r.ood_acc = ood;
  r.curve.push_back({1, 1.0, test, ood});
  return r;
}

std::map<std::string, std::string> digests(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("run_", 0) == 0) out[name] = trainer::record_digest(read_run(e.path()));
    else out[name] = hex_digest(read_file(e.path()));
  }
  return out;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(SMOE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("config parsing") {
  TEST_CASE("kinds and payloads") {
    const auto train = parse_experiment(std::string("{\"kind\": \"TRAIN\", ") + kTinyTrain + "}");
    CHECK(train.kind == ExperimentKind::kTrain);
    REQUIRE(train.train);
    CHECK(train.train->model.d_model == 16);
    CHECK(train.output_dir == "results");

    const auto sweep = parse_experiment(sweep_doc("out"));
    CHECK(sweep.kind == ExperimentKind::kSweep);
    REQUIRE(sweep.sweep);
    CHECK(sweep.sweep->k_list == std::vector<std::size_t>{1, 8});
    const auto cells = expand_sweep(*sweep.train, *sweep.sweep);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].model.k_train == 1);
    CHECK(cells[1].model.k_train == 8);
    CHECK(cells[0].model.d_model == 16);

    const auto theory = parse_experiment(R"({"kind": "THEORY", "theory": [{"N": 2}, {"T": 16}]})");
    CHECK(theory.theory.size() == 2);
    CHECK(theory.theory[0].N == 2);
    CHECK(theory.theory[1].T == 16);
  }

  TEST_CASE("errors carry the offending line") {
    auto line_of = [](const std::string& text) -> std::size_t {
      try {
        parse_experiment(text);
      } catch (const ConfigLocationError& e) {
        return e.line();
      }
      return 0;
    };
    CHECK(line_of("{\n  \"kind\": \"TRAIN\",\n  \"train\": {\n    \"steps\": 0\n  }\n}") == 4);
    CHECK(line_of("{\n  \"kind\": \"TRAIN\",\n  \"train\": {\n    \"bogus\": 1\n  }\n}") == 4);
    CHECK(line_of("{\n  \"kind\": \"THEORY\",\n  \"theory\": [\n    {\"N\": 4},\n    {\"delta\": 2.0}\n  ]\n}") == 5);
    CHECK(line_of("{\n  \"kind\": \"TRAIN\",\n  \"train\": {\n    \"steps\": 3,,\n  }\n}") == 4);
    CHECK(line_of("{\n  \"kind\": \"LAUNCH\"\n}") == 2);
    CHECK(line_of("{\n  \"kind\": \"TRAIN\",\n  \"extra\": 1\n}") == 3);
    CHECK(line_of("{\"train\": {}}") == 1);

    try {
      parse_experiment("{\n  \"kind\": \"TRAIN\",\n  \"train\": {\n    \"steps\": 0\n  }\n}");
    } catch (const ConfigLocationError& e) {
      CHECK(std::string(e.what()).rfind("line 4: ", 0) == 0);
      CHECK(e.detail().find("steps") != std::string::npos);
    }
  }

  TEST_CASE("payload must match kind") {
    CHECK_THROWS_AS(parse_experiment(R"({"kind": "TRAIN"})"), ConfigError);
    CHECK_THROWS_AS(parse_experiment(R"({"kind": "THEORY", "theory": []})"), ConfigError);
    CHECK_THROWS_AS(parse_experiment(R"({"kind": "SWEEP", "sweep": {"M_list": [], "k_list": [1], "seeds": [0]}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment(R"({"kind": "THEORY", "theory": [{}], "sweep": {"M_list": [1], "k_list": [1], "seeds": [0]}})"),
                    ConfigError);
    CHECK_THROWS_AS(load_experiment("/nonexistent/config.json"), InputError);
  }

  TEST_CASE("file errors name the source") {
    TempDir tmp("load");
    const auto path = tmp.path() / "bad.json";
    write_file(path, "{\n  \"kind\": \"TRAIN\",\n  \"train\": {\"steps\": 0}\n}\n");
    try {
      load_experiment(path);
      FAIL("expected a config error");
    } catch (const ConfigLocationError& e) {
      CHECK(std::string(e.what()).rfind(path.string() + ":3: ", 0) == 0);
    }
  }

  TEST_CASE("overrides") {
    auto cfg = parse_experiment(sweep_doc("out"));
    RunOptions options;
    options.output_dir = "elsewhere";
    options.seed = 7;
    cfg = apply_overrides(cfg, options);
    CHECK(cfg.output_dir == "elsewhere");
    CHECK(cfg.sweep->seeds == std::vector<std::uint64_t>{7});
  }
}

TEST_SUITE("statistics") {
  TEST_CASE("mean and standard error") {
    const std::vector<double> three{0.2, 0.4, 0.6};
    const auto s = mean_and_se(three);
    CHECK(s.mean == doctest::Approx(0.4).epsilon(1e-12));
    REQUIRE(s.std_error);
    CHECK(*s.std_error == doctest::Approx(0.2 / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(std::abs(*s.std_error - 0.1155) < 1e-4);
    const std::vector<double> one{0.3};
    CHECK_FALSE(mean_and_se(one).std_error);
    CHECK(mean_and_se(one).mean == 0.3);
    CHECK_THROWS_AS(mean_and_se(std::vector<double>{}), ConfigError);
  }

  TEST_CASE("summary groups by cell") {
    const std::vector<trainer::RunRecord> records{
        fake_record(2, 1, 1, 0.4, 0.1), fake_record(2, 1, 0, 0.2, 0.3), fake_record(1, 8, 0, 0.9, 0.8),
        fake_record(2, 1, 2, 0.6, 0.2)};
    std::vector<CellFailure> failures{{2, 8, 0, "abc", "diverged"}};
    const auto s = summarize(records, failures);
    REQUIRE(s.rows.size() == 4);
    CHECK(s.rows[0].M == 1);
    CHECK(s.rows[1].seed == 0);
    CHECK(s.rows[3].seed == 2);
    REQUIRE(s.aggregates.size() == 2);
    CHECK(s.aggregates[0].num_seeds == 1);
    CHECK_FALSE(s.aggregates[0].test_acc.std_error);
    CHECK(s.aggregates[0].test_acc.mean == 0.9);
    CHECK(s.aggregates[1].num_seeds == 3);
    CHECK(s.aggregates[1].test_acc.mean == doctest::Approx(0.4));
    CHECK(*s.aggregates[1].test_acc.std_error == doctest::Approx(0.11547).epsilon(1e-4));
    CHECK(s.failures.size() == 1);

    std::ostringstream csv;
    write_summary_csv(csv, s);
    CHECK(csv.str().rfind("M,k_train,seed,test_acc,ood_acc\n1,8,0,", 0) == 0);
  }
}

TEST_SUITE("artifacts") {
  TEST_CASE("aggregate on disk") {
    TempDir tmp("aggregate");
    CHECK_THROWS_AS(aggregate(tmp.path()), NoDataError);
    CHECK_THROWS_AS(aggregate(tmp.path() / "missing"), NoDataError);

    const auto r = fake_record(3, 2, 5, 0.25, 0.5);
    const auto path = write_run(r, tmp.path());
    CHECK(path.filename() == run_filename(r.config_hash, 5));
    CHECK(read_run(path) == r);
    const auto s = aggregate(tmp.path());
    REQUIRE(s.aggregates.size() == 1);
    CHECK(s.aggregates[0].test_acc.mean == 0.25);
    CHECK(s.aggregates[0].ood_acc.mean == 0.5);
    CHECK_FALSE(s.aggregates[0].test_acc.std_error);
    const auto first = digests(tmp.path());
    aggregate(tmp.path());
    CHECK(digests(tmp.path()) == first);
  }

  TEST_CASE("theory run writes one curve per set plus the k* table") {
    TempDir tmp("theory");
    auto cfg = parse_experiment(
        R"({"kind": "THEORY", "theory": [{"N": 4}, {"N": 8, "m": 1000}, {"variant": "PAPER_LITERAL"}]})");
    cfg.output_dir = tmp.path();
    CHECK(run_experiment(cfg, {}) == kExitOk);
    std::size_t curves = 0;
    for (const auto& e : fs::directory_iterator(tmp.path())) {
      const auto name = e.path().filename().string();
      if (name.rfind("theory_", 0) == 0 && name != "theory_kstar.csv") {
        ++curves;
        CHECK(read_file(e.path()).rfind("k,approx,est,total\n", 0) == 0);
      }
    }
    CHECK(curves == 3);
    std::istringstream table(read_file(tmp.path() / "theory_kstar.csv"));
    std::string line;
    std::size_t rows = 0;
    std::getline(table, line);
    while (std::getline(table, line)) ++rows;
    CHECK(rows == 3);
  }

  TEST_CASE("sweep gives one record per cell and reruns identically") {
    TempDir a("sweep_a");
    TempDir b("sweep_b");
    const auto cfg_a = parse_experiment(sweep_doc(a.path()));
    const auto cfg_b = parse_experiment(sweep_doc(b.path()));
    CHECK(run_experiment(cfg_a, {}) == kExitOk);
    CHECK(run_experiment(cfg_b, {}) == kExitOk);
    const auto s = aggregate(a.path());
    CHECK(s.rows.size() == 2);
    CHECK(s.aggregates.size() == 2);
    CHECK(s.failures.empty());
    const auto da = digests(a.path());
    CHECK(da.size() == 6);  // two records, two curves, two summaries
    CHECK(da == digests(b.path()));

    RunOptions resume;
    resume.resume = true;
    const auto record = a.path() / run_filename(s.rows[0].config_hash, 0);
    const auto stamp = fs::last_write_time(record);
    CHECK(run_experiment(cfg_a, resume) == kExitOk);
    CHECK(fs::last_write_time(record) == stamp);
    CHECK(digests(a.path()) == da);
  }

  TEST_CASE("parallel workers produce the same artifacts") {
    TempDir serial("serial");
    TempDir parallel("parallel");
    CHECK(run_experiment(parse_experiment(sweep_doc(serial.path())), {}) == kExitOk);
    RunOptions two;
    two.jobs = 2;
    CHECK(run_experiment(parse_experiment(sweep_doc(parallel.path())), two) == kExitOk);
    CHECK(digests(serial.path()) == digests(parallel.path()));
  }
}

TEST_SUITE("cli") {
  TEST_CASE("exit codes") {
    TempDir tmp("cli");
    const auto good = tmp.path() / "theory.json";
    write_file(good, R"({"kind": "THEORY", "theory": [{"N": 4}]})");
    const auto bad = tmp.path() / "bad.json";
    write_file(bad, R"({"kind": "THEORY", "theory": [{"N": 0}]})");
    const auto out = (tmp.path() / "out").string();
    CHECK(cli("theory --config " + good.string() + " --out " + out) == kExitOk);
    CHECK(fs::exists(fs::path(out) / "theory_kstar.csv"));
    CHECK(cli("theory --config " + bad.string() + " --out " + out) == kExitConfig);
    CHECK(cli("train --config " + good.string() + " --out " + out) == kExitConfig);
    CHECK(cli("frobnicate") == kExitConfig);
    CHECK(cli("aggregate " + (tmp.path() / "empty").string()) == kExitNoData);
    CHECK(cli("--help") == kExitOk);
  }
}
