// SPDX-License-Identifier: Apache-2.0
#include "smoe/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "smoe/common/format.hpp"
#include "smoe/common/hash.hpp"
#include "smoe/nn/ops.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace smoe::trainer {

namespace {

constexpr std::size_t kEvalBatch = 256;

// Activations are large and short-lived; keeping freed blocks on the heap
// avoids an mmap/munmap pair and fresh page faults for each of them per step.
void tune_allocator() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 32 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
    return true;
  }();
  (void)once;
#endif
}

template <class T>
void read_field(const nlohmann::json& j, const std::string& key, T& out) {
  try {
    out = j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("train." + key + " has the wrong type");
  }
}

void read_count(const nlohmann::json& j, const std::string& key, std::size_t& out) {
  if (!j.is_number_unsigned()) throw ConfigError("train." + key + " must be a non-negative integer");
  out = j.get<std::size_t>();
}

void read_real(const nlohmann::json& j, const std::string& key, double& out) {
  if (!j.is_number()) throw ConfigError("train." + key + " must be a number");
  out = j.get<double>();
}

std::vector<std::pair<std::string, double>> parameter_norms(model::SMoETransformer& model) {
  std::vector<std::pair<std::string, double>> norms;
  for (const auto& p : model.parameters()) {
    double ss = 0.0;
    for (double v : p.tensor->data()) ss += v * v;
    norms.emplace_back(p.name, std::sqrt(ss));
  }
  return norms;
}

}  // namespace

void TrainConfig::validate() const {
  if (steps == 0) throw ConfigError("train.steps must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (eval_every == 0) throw ConfigError("train.eval_every must be positive");
  if (eval_instances == 0) throw ConfigError("train.eval_instances must be positive");
  if (p < 4) throw ConfigError("train.p must be at least 4");
  if (num_rules < 1 || num_rules > sraven::kMaxRules) throw ConfigError("train.num_rules must be in [1, 8]");
  if (num_attributes < 1 || num_attributes > num_rules) {
    throw ConfigError("train.M must be in [1, num_rules]");
  }
  if (!(ood_fraction > 0.0 && ood_fraction < 1.0)) {
    throw ConfigError("train.ood_fraction must lie strictly between 0 and 1");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  if (clip_gradients && !(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be positive");
  const auto mc = model_config();
  mc.validate();
  if (mc.max_seq_len < sraven::encoded_length(num_attributes)) {
    throw ConfigError("model.max_seq_len (" + std::to_string(mc.max_seq_len) +
                      ") is shorter than the encoded sequence (" +
                      std::to_string(sraven::encoded_length(num_attributes)) + ")");
  }
  for (auto k : eval_k_list) {
    if (k < 1 || k > mc.num_experts) {
      throw ConfigError("train.eval_k_list entry " + std::to_string(k) + " outside [1, " +
                        std::to_string(mc.num_experts) + "]");
    }
  }
}

model::ModelConfig TrainConfig::model_config() const {
  model::ModelConfig mc = model;
  mc.vocab_size = sraven::Vocabulary{p}.size();
  mc.num_outputs = num_attributes;
  mc.seed = derive_seed(seed, "init");
  return mc;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  nlohmann::json model = c.model;
  model.erase("vocab_size");
  model.erase("num_outputs");
  model.erase("seed");
  j = nlohmann::json{{"model", model},
                     {"M", c.num_attributes},
                     {"p", c.p},
                     {"num_rules", c.num_rules},
                     {"ood_fraction", c.ood_fraction},
                     {"steps", c.steps},
                     {"batch_size", c.batch_size},
                     {"lr", c.lr},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"eval_every", c.eval_every},
                     {"eval_instances", c.eval_instances},
                     {"seed", c.seed},
                     {"eval_k_list", c.eval_k_list},
                     {"clip_gradients", c.clip_gradients},
                     {"clip_norm", c.clip_norm},
                     {"single_instance", c.single_instance}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "model") {
      for (const char* derived : {"vocab_size", "num_outputs", "seed"}) {
        if (value.is_object() && value.contains(derived)) {
          throw ConfigError(std::string("model.") + derived + " is derived from the train config");
        }
      }
      value.get_to(c.model);
    } else if (key == "M") read_count(value, key, c.num_attributes);
    else if (key == "p") {
      if (!value.is_number_integer()) throw ConfigError("train.p must be an integer");
      c.p = value.get<int>();
    } else if (key == "num_rules") read_count(value, key, c.num_rules);
    else if (key == "ood_fraction") read_real(value, key, c.ood_fraction);
    else if (key == "steps") read_count(value, key, c.steps);
    else if (key == "batch_size") read_count(value, key, c.batch_size);
    else if (key == "lr") read_real(value, key, c.lr);
    else if (key == "beta1") read_real(value, key, c.beta1);
    else if (key == "beta2") read_real(value, key, c.beta2);
    else if (key == "eval_every") read_count(value, key, c.eval_every);
    else if (key == "eval_instances") read_count(value, key, c.eval_instances);
    else if (key == "seed") {
      if (!value.is_number_unsigned()) throw ConfigError("train.seed must be a non-negative integer");
      c.seed = value.get<std::uint64_t>();
    } else if (key == "eval_k_list") {
      if (!value.is_array()) throw ConfigError("train.eval_k_list must be an array");
      c.eval_k_list.clear();
      for (const auto& k : value) {
        std::size_t v = 0;
        read_count(k, key, v);
        c.eval_k_list.push_back(v);
      }
    } else if (key == "clip_gradients") read_field(value, key, c.clip_gradients);
    else if (key == "clip_norm") read_real(value, key, c.clip_norm);
    else if (key == "single_instance") read_field(value, key, c.single_instance);
    else throw ConfigError("unknown key train." + key);
  }
}

std::string config_hash(const TrainConfig& config) {
  return hex_digest(nlohmann::json(config).dump());
}

void to_json(nlohmann::json& j, const RunRecord& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& c : r.curve) {
    curve.push_back({{"step", c.step}, {"train_loss", c.train_loss}, {"test_acc", c.test_acc},
                     {"ood_acc", c.ood_acc}});
  }
  nlohmann::json per_k = nlohmann::json::array();
  for (const auto& e : r.per_k_eval) {
    per_k.push_back({{"k", e.k}, {"test_acc", e.test_acc}, {"ood_acc", e.ood_acc},
                     {"test_loss", e.test_loss}, {"ood_loss", e.ood_loss}});
  }
  nlohmann::json usage = nlohmann::json::array();
  for (const auto& u : r.expert_usage) {
    usage.push_back({{"counts", u.counts}, {"routed_tokens", u.routed_tokens}});
  }
  j = nlohmann::json{{"config_hash", r.config_hash}, {"seed", r.seed},
                     {"config", r.config},           {"curve", curve},
                     {"per_k_eval", per_k},          {"expert_usage", usage},
                     {"test_acc", r.test_acc},       {"ood_acc", r.ood_acc},
                     {"wall_time_seconds", r.wall_time_seconds}};
}

void from_json(const nlohmann::json& j, RunRecord& r) {
  try {
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.at("config").get<TrainConfig>();
    r.curve.clear();
    for (const auto& c : j.at("curve")) {
      r.curve.push_back({c.at("step").get<std::size_t>(), c.at("train_loss").get<double>(),
                         c.at("test_acc").get<double>(), c.at("ood_acc").get<double>()});
    }
    r.per_k_eval.clear();
    for (const auto& e : j.at("per_k_eval")) {
      r.per_k_eval.push_back({e.at("k").get<std::size_t>(), e.at("test_acc").get<double>(),
                              e.at("ood_acc").get<double>(), e.at("test_loss").get<double>(),
                              e.at("ood_loss").get<double>()});
    }
    r.expert_usage.clear();
    for (const auto& u : j.at("expert_usage")) {
      r.expert_usage.push_back({u.at("counts").get<std::vector<std::uint64_t>>(),
                                u.at("routed_tokens").get<std::uint64_t>()});
    }
    r.test_acc = j.at("test_acc").get<double>();
    r.ood_acc = j.at("ood_acc").get<double>();
    r.wall_time_seconds = j.at("wall_time_seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed run record: ") + e.what());
  }
}

std::string record_digest(const RunRecord& record) {
  nlohmann::json j = record;
  j.erase("wall_time_seconds");
  return hex_digest(j.dump());
}

void write_curve_csv(std::ostream& out, const RunRecord& record) {
  out << "step,train_loss,test_acc,ood_acc\n";
  for (const auto& c : record.curve) {
    out << c.step << ',' << format_double(c.train_loss) << ',' << format_double(c.test_acc) << ','
        << format_double(c.ood_acc) << '\n';
  }
}

std::pair<model::TokenBatch, std::vector<std::size_t>> make_batch(
    std::span<const sraven::SravenInstance> instances, int p) {
  if (instances.empty()) throw ConfigError("batch needs at least one instance");
  const std::size_t m = instances.front().num_attributes();
  model::TokenBatch tokens{instances.size(), sraven::encoded_length(m), {}};
  tokens.ids.reserve(tokens.batch * tokens.seq);
  std::vector<std::size_t> targets;
  targets.reserve(instances.size() * m);
  for (const auto& inst : instances) {
    if (inst.num_attributes() != m) throw ContractViolation("batch mixes attribute counts");
    const auto ids = sraven::encode(inst, p);
    tokens.ids.insert(tokens.ids.end(), ids.begin(), ids.end());
    for (int v : inst.target) targets.push_back(static_cast<std::size_t>(v));
  }
  return {std::move(tokens), std::move(targets)};
}

EvalResult evaluate(model::SMoETransformer& model, std::span<const sraven::SravenInstance> snapshot,
                    std::size_t k_eval, int p) {
  if (snapshot.empty()) throw ConfigError("evaluate: empty snapshot");
  const std::size_t num_experts = model.config().num_experts;
  if (k_eval < 1 || k_eval > num_experts) {
    throw ConfigError("evaluate: k_eval=" + std::to_string(k_eval) + " outside [1, " +
                      std::to_string(num_experts) + "]");
  }
  const std::size_t previous_k = model.inference_k();
  model.set_inference_k(k_eval);

  const std::size_t vocab = model.config().vocab_size;
  std::size_t correct = 0;
  double loss_total = 0.0;
  std::size_t heads_total = 0;
  try {
    for (std::size_t start = 0; start < snapshot.size(); start += kEvalBatch) {
      const auto chunk = snapshot.subspan(start, std::min(kEvalBatch, snapshot.size() - start));
      const auto [tokens, targets] = make_batch(chunk, p);
      nn::Tape tape(false);
      const auto logits = tape.value(model.forward(tape, tokens, model::RoutingMode::kInfer)).data();
      const std::size_t m = targets.size() / chunk.size();
      for (std::size_t b = 0; b < chunk.size(); ++b) {
        bool all = true;
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t row = b * m + i;
          const auto rl = logits.subspan(row * vocab, vocab);
          loss_total += nn::cross_entropy(rl, targets[row]);
          // Only value tokens can be attribute values.
          const auto values = rl.first(static_cast<std::size_t>(p));
          const auto best = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
          all = all && best == targets[row];
        }
        heads_total += m;
        if (all) ++correct;
      }
    }
  } catch (...) {
    model.set_inference_k(previous_k);
    throw;
  }
  model.set_inference_k(previous_k);
  return {static_cast<double>(correct) / static_cast<double>(snapshot.size()),
          loss_total / static_cast<double>(heads_total)};
}

TrainingDiverged::TrainingDiverged(std::size_t step, double loss,
                                   std::vector<std::pair<std::string, double>> norms)
    : NumericDomainError("training loss became non-finite at step " + std::to_string(step)),
      step_(step),
      loss_(loss),
      norms_(std::move(norms)) {}

Trainer::Trainer(TrainConfig config)
    : config_((config.validate(), std::move(config))),
      model_(config_.model_config()),
      data_rng_(derive_seed(config_.seed, "data")) {
  tune_allocator();
  optimizer_.learning_rate = config_.lr;
  optimizer_.beta1 = config_.beta1;
  optimizer_.beta2 = config_.beta2;

  split_ = sraven::split_combinations(
      sraven::enumerate_rule_tuples(config_.num_rules, config_.num_attributes), config_.ood_fraction,
      derive_seed(config_.seed, "split"));
  test_ = sraven::sample_snapshot(split_.train_tuples, config_.eval_instances, config_.p,
                                  derive_seed(config_.seed, "test"));
  ood_ = sraven::sample_snapshot(split_.ood_tuples, config_.eval_instances, config_.p,
                                 derive_seed(config_.seed, "ood"));
  if (config_.single_instance) {
    Rng rng(derive_seed(config_.seed, "fixed"));
    fixed_ = sraven::sample_instance(split_.train_tuples.front(), config_.p, rng);
  }
}

double Trainer::step_once(std::size_t step, std::vector<ExpertUsageRecord>& usage) {
  std::vector<sraven::SravenInstance> batch;
  batch.reserve(config_.batch_size);
  std::uniform_int_distribution<std::size_t> pick(0, split_.train_tuples.size() - 1);
  for (std::size_t b = 0; b < config_.batch_size; ++b) {
    if (config_.single_instance) {
      batch.push_back(fixed_);
    } else {
      batch.push_back(sraven::sample_instance(split_.train_tuples[pick(data_rng_)], config_.p, data_rng_));
    }
  }
  const auto [tokens, targets] = make_batch(batch, config_.p);

  std::vector<model::ExpertUsage> step_usage;
  nn::Tape tape;
  nn::Var loss;
  try {
    const auto logits = model_.forward(tape, tokens, model::RoutingMode::kTrain, &step_usage);
    loss = nn::ops::cross_entropy_mean(tape, logits, targets);
  } catch (const NumericDomainError&) {
    // A non-finite activation upstream of the loss.
    throw TrainingDiverged(step, std::numeric_limits<double>::quiet_NaN(), parameter_norms(model_));
  }
  const double value = tape.value(loss)[0];
  if (!std::isfinite(value)) throw TrainingDiverged(step, value, parameter_norms(model_));

  model_.zero_grad();
  tape.backward(loss);
  const auto params = model_.parameter_tensors();
  if (config_.clip_gradients) nn::clip_grad_norm(params, config_.clip_norm);
  nn::adam_step(params, optimizer_);

  for (std::size_t layer = 0; layer < step_usage.size(); ++layer) {
    auto& rec = usage[layer];
    const auto& counts = step_usage[layer].counts;
    rec.counts.resize(counts.size(), 0);
    for (std::size_t j = 0; j < counts.size(); ++j) rec.counts[j] += counts[j];
    rec.routed_tokens += step_usage[layer].total() / config_.model.k_train;
  }
  return value;
}

RunRecord Trainer::run() {
  const auto start = std::chrono::steady_clock::now();
  RunRecord record;
  record.config = config_;
  record.config_hash = config_hash(config_);
  record.seed = config_.seed;
  record.expert_usage.resize(config_.model.num_blocks);

  const std::size_t k_train = config_.model.k_train;
  double window_loss = 0.0;
  std::size_t window_steps = 0;
  for (std::size_t step = 1; step <= config_.steps; ++step) {
    const double loss = step_once(step, record.expert_usage);
    window_loss += loss;
    ++window_steps;
    if (on_step) on_step(step, loss);
    if (step % config_.eval_every == 0 || step == config_.steps) {
      CurvePoint point;
      point.step = step;
      point.train_loss = window_loss / static_cast<double>(window_steps);
      point.test_acc = evaluate(model_, test_, k_train, config_.p).accuracy;
      point.ood_acc = evaluate(model_, ood_, k_train, config_.p).accuracy;
      record.curve.push_back(point);
      window_loss = 0.0;
      window_steps = 0;
    }
  }
  record.test_acc = record.curve.back().test_acc;
  record.ood_acc = record.curve.back().ood_acc;

  for (auto k : config_.eval_k_list) {
    const auto test = evaluate(model_, test_, k, config_.p);
    const auto ood = evaluate(model_, ood_, k, config_.p);
    record.per_k_eval.push_back({k, test.accuracy, ood.accuracy, test.mean_loss, ood.mean_loss});
  }
  record.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

RunRecord train(const TrainConfig& config) { return Trainer(config).run(); }

}  // namespace smoe::trainer
