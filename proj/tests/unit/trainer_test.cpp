// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>

#include "smoe/common/error.hpp"
#include "smoe/common/hash.hpp"
#include "smoe/trainer/trainer.hpp"

using namespace smoe;
using namespace smoe::trainer;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.model.d_model = 16;
  c.model.num_heads = 2;
  c.model.num_blocks = 1;
  c.model.num_experts = 4;
  c.model.k_train = 2;
  c.model.expert_hidden = 16;
  c.model.max_seq_len = 32;
  c.model.rel_pos_window = 8;
  c.steps = 6;
  c.batch_size = 4;
  c.eval_every = 3;
  c.eval_instances = 32;
  c.seed = 3;
  return c;
}

std::string parameter_digest(model::SMoETransformer& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto* p : model.parameter_tensors()) h = fnv1a64(p->data(), h);
  return to_hex(h);
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("validation") {
    auto c = small_config();
    c.steps = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.eval_k_list = {1, 5};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.num_attributes = 2;
    c.model.max_seq_len = 20;  // needs 26
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.num_attributes = 9;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(Trainer{[] { auto b = small_config(); b.steps = 0; return b; }()}, ConfigError);
  }

  TEST_CASE("derived model fields") {
    auto c = small_config();
    c.p = 7;
    c.num_attributes = 3;
    c.model.max_seq_len = 40;
    const auto m = c.model_config();
    CHECK(m.vocab_size == 10);
    CHECK(m.num_outputs == 3);
    CHECK(m.seed != c.seed);
  }

  TEST_CASE("json round trip and hashing") {
    auto c = small_config();
    c.eval_k_list = {1, 2, 4};
    nlohmann::json j = c;
    CHECK(j.get<TrainConfig>() == c);
    CHECK(config_hash(j.get<TrainConfig>()) == config_hash(c));
    CHECK(config_hash(c).size() == 16);
    auto d = c;
    d.lr = 2e-3;
    CHECK(config_hash(d) != config_hash(c));
    CHECK(nlohmann::json::object().get<TrainConfig>() == TrainConfig{});
    CHECK_THROWS_AS(nlohmann::json({{"stepz", 1}}).get<TrainConfig>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"model", {{"vocab_size", 20}}}}).get<TrainConfig>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"lr", "fast"}}).get<TrainConfig>(), ConfigError);
  }
}

TEST_SUITE("batches") {
  TEST_CASE("targets follow the logit row order") {
    Rng rng(1);
    std::vector<sraven::SravenInstance> batch;
    for (int i = 0; i < 3; ++i) batch.push_back(sraven::sample_instance({sraven::Rule::kAdd, sraven::Rule::kMin}, 10, rng));
    const auto [tokens, targets] = make_batch(batch, 10);
    CHECK(tokens.batch == 3);
    CHECK(tokens.seq == 26);
    REQUIRE(targets.size() == 6);
    for (std::size_t b = 0; b < 3; ++b) {
      for (std::size_t i = 0; i < 2; ++i) CHECK(targets[b * 2 + i] == static_cast<std::size_t>(batch[b].target[i]));
      const auto enc = sraven::encode(batch[b], 10);
      CHECK(std::equal(enc.begin(), enc.end(), tokens.ids.begin() + static_cast<std::ptrdiff_t>(b * 26)));
    }
  }
}

TEST_SUITE("evaluate") {
  TEST_CASE("leaves the model untouched and is repeatable") {
    Trainer t(small_config());
    auto& model = t.model();
    model.set_inference_k(3);
    const auto before = parameter_digest(model);
    const auto a = evaluate(model, t.test_snapshot(), 1, 10);
    const auto b = evaluate(model, t.test_snapshot(), 1, 10);
    CHECK(parameter_digest(model) == before);
    CHECK(model.inference_k() == 3);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.mean_loss == b.mean_loss);
    CHECK(a.accuracy >= 0.0);
    CHECK(a.accuracy <= 1.0);
    CHECK(std::isfinite(a.mean_loss));
  }

  TEST_CASE("errors") {
    Trainer t(small_config());
    CHECK_THROWS_AS(evaluate(t.model(), {}, 1, 10), ConfigError);
    CHECK_THROWS_AS(evaluate(t.model(), t.test_snapshot(), 0, 10), ConfigError);
    CHECK_THROWS_AS(evaluate(t.model(), t.test_snapshot(), 5, 10), ConfigError);
  }

  TEST_CASE("untrained model sits at chance") {
    // A single init can correlate with the context, so average over inits.
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      auto c = small_config();
      c.eval_instances = 2048;
      c.seed = seed;
      Trainer t(c);
      total += evaluate(t.model(), t.test_snapshot(), 2, 10).accuracy;
    }
    CHECK(total / 8.0 == doctest::Approx(0.1).epsilon(0.15));
  }

  TEST_CASE("snapshots come from the right tuples") {
    Trainer t(small_config());
    const auto& split = t.split();
    for (const auto& inst : t.test_snapshot()) {
      CHECK(std::find(split.train_tuples.begin(), split.train_tuples.end(), inst.tuple) != split.train_tuples.end());
    }
    for (const auto& inst : t.ood_snapshot()) {
      CHECK(std::find(split.ood_tuples.begin(), split.ood_tuples.end(), inst.tuple) != split.ood_tuples.end());
    }
    CHECK(t.test_snapshot().size() == 32);
  }
}

TEST_SUITE("train") {
  TEST_CASE("one step gives a one-point record") {
    auto c = small_config();
    c.steps = 1;
    std::size_t calls = 0;
    Trainer t(c);
    t.on_step = [&](std::size_t step, double loss) {
      ++calls;
      CHECK(step == 1);
      CHECK(std::isfinite(loss));
    };
    const auto r = t.run();
    CHECK(calls == 1);
    REQUIRE(r.curve.size() == 1);
    CHECK(r.curve[0].step == 1);
    CHECK(r.config_hash == config_hash(c));
  }

  TEST_CASE("record invariants") {
    auto c = small_config();
    c.steps = 7;
    c.eval_k_list = {1, 2, 3, 4};
    Trainer t(c);
    std::size_t calls = 0;
    t.on_step = [&](std::size_t, double) { ++calls; };
    const auto r = t.run();
    CHECK(calls == 7);
    REQUIRE(r.curve.size() == 3);  // steps 3, 6 and the final 7
    CHECK(r.curve[0].step == 3);
    CHECK(r.curve[2].step == 7);
    for (std::size_t i = 1; i < r.curve.size(); ++i) CHECK(r.curve[i].step > r.curve[i - 1].step);
    for (const auto& p : r.curve) {
      CHECK(p.test_acc >= 0.0);
      CHECK(p.test_acc <= 1.0);
      CHECK(p.ood_acc >= 0.0);
      CHECK(p.ood_acc <= 1.0);
    }
    CHECK(r.test_acc == r.curve.back().test_acc);
    REQUIRE(r.per_k_eval.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(r.per_k_eval[i].k == i + 1);
    CHECK(r.per_k_eval[1].test_acc == r.test_acc);
    CHECK(r.per_k_eval[1].ood_acc == r.ood_acc);
    REQUIRE(r.expert_usage.size() == 1);
    const auto& u = r.expert_usage[0];
    CHECK(u.counts.size() == 4);
    CHECK(std::accumulate(u.counts.begin(), u.counts.end(), std::uint64_t{0}) == u.routed_tokens * 2);
    CHECK(u.routed_tokens == 7 * 4);  // one routed position per sequence in the single block
  }

  TEST_CASE("standard eval equals evaluate at k_train") {
    Trainer t(small_config());
    const auto r = t.run();
    CHECK(evaluate(t.model(), t.test_snapshot(), 2, 10).accuracy == r.test_acc);
    CHECK(evaluate(t.model(), t.ood_snapshot(), 2, 10).accuracy == r.ood_acc);
  }

  TEST_CASE("identical configs give identical digests") {
    const auto a = train(small_config());
    const auto b = train(small_config());
    CHECK(record_digest(a) == record_digest(b));
    auto with_time = b;
    with_time.wall_time_seconds += 100.0;
    CHECK(record_digest(with_time) == record_digest(a));
    auto c = small_config();
    c.seed = 4;
    CHECK(record_digest(train(c)) != record_digest(a));
  }

  TEST_CASE("single instance is memorized") {
    auto c = small_config();
    c.model.d_model = 32;
    c.model.num_heads = 4;
    c.single_instance = true;
    c.batch_size = 1;
    c.steps = 500;
    c.eval_every = 500;
    Trainer t(c);
    std::vector<double> losses;
    t.on_step = [&](std::size_t, double loss) { losses.push_back(loss); };
    t.run();
    const auto& inst = t.fixed_instance();
    const auto [tokens, targets] = make_batch(std::span(&inst, 1), c.p);
    const auto pred = t.model().predict(tokens);
    CHECK(pred[0][0] == static_cast<std::size_t>(inst.target[0]));
    CHECK(losses.back() < 1e-3);
    // Smoothed loss falls monotonically until it first drops below 1e-3.
    std::deque<double> window;
    double sum = 0.0, prev = INFINITY;
    for (double l : losses) {
      window.push_back(l);
      sum += l;
      if (window.size() > 10) {
        sum -= window.front();
        window.pop_front();
      }
      if (window.size() < 10) continue;
      const double mean = sum / 10.0;
      CHECK(mean <= prev);
      prev = mean;
      if (mean < 1e-3) break;
    }
  }

  TEST_CASE("non-finite loss aborts with diagnostics") {
    Trainer t(small_config());
    t.model().parameter_tensors().front()->data()[0] = std::numeric_limits<double>::quiet_NaN();
    try {
      t.run();
      FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
      CHECK(e.step() == 1);
      CHECK(std::isnan(e.loss()));
      CHECK_FALSE(e.parameter_norms().empty());
    }
  }
}

TEST_SUITE("records") {
  TEST_CASE("json round trip and csv") {
    auto c = small_config();
    c.eval_k_list = {1, 4};
    const auto r = train(c);
    nlohmann::json j = r;
    CHECK(j.get<RunRecord>() == r);
    CHECK(record_digest(j.get<RunRecord>()) == record_digest(r));
    std::ostringstream csv;
    write_curve_csv(csv, r);
    std::istringstream lines(csv.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == "step,train_loss,test_acc,ood_acc");
    std::size_t rows = 0;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == r.curve.size());
    CHECK_THROWS_AS(nlohmann::json({{"seed", 1}}).get<RunRecord>(), InputError);
  }
}
