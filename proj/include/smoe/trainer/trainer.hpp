// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smoe/common/error.hpp"
#include "smoe/model/config.hpp"
#include "smoe/model/transformer.hpp"
#include "smoe/nn/adam.hpp"
#include "smoe/sraven/sraven.hpp"

namespace smoe::trainer {

/// Hyperparameters of one training run. The model's vocabulary size and head
/// count are derived from p and M (see model_config()), and its init seed from
/// `seed`, so they need not be set by hand.
struct TrainConfig {
  model::ModelConfig model;
  std::size_t num_attributes = 1;  // M
  int p = 10;
  std::size_t num_rules = 8;  // R
  double ood_fraction = 0.25;
  std::size_t steps = 2000;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t eval_every = 500;
  std::size_t eval_instances = 2048;
  std::uint64_t seed = 0;
  std::vector<std::size_t> eval_k_list;
  bool clip_gradients = false;
  double clip_norm = 1.0;
  /// Train on one fixed instance (memorization check).
  bool single_instance = false;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;
  /// The model config actually instantiated: vocab p+3, M heads, init seed
  /// derived from `seed`.
  model::ModelConfig model_config() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Hex digest of the canonical JSON form. Equal configs hash equally.
std::string config_hash(const TrainConfig& config);

struct CurvePoint {
  std::size_t step = 0;
  double train_loss = 0.0;  // mean over the steps since the previous point
  double test_acc = 0.0;
  double ood_acc = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

struct KEval {
  std::size_t k = 0;
  double test_acc = 0.0;
  double ood_acc = 0.0;
  double test_loss = 0.0;
  double ood_loss = 0.0;
  bool operator==(const KEval&) const = default;
};

/// Token-to-expert assignments made during training, one row per block.
/// Each row sums to routed_tokens * k_train.
struct ExpertUsageRecord {
  std::vector<std::uint64_t> counts;
  std::uint64_t routed_tokens = 0;
  bool operator==(const ExpertUsageRecord&) const = default;
};

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  TrainConfig config;
  std::vector<CurvePoint> curve;
  std::vector<KEval> per_k_eval;
  std::vector<ExpertUsageRecord> expert_usage;
  double test_acc = 0.0;
  double ood_acc = 0.0;
  double wall_time_seconds = 0.0;
  bool operator==(const RunRecord&) const = default;
};

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

/// Digest of the serialized record with wall_time_seconds removed.
std::string record_digest(const RunRecord& record);

/// Header step,train_loss,test_acc,ood_acc then one row per curve point.
void write_curve_csv(std::ostream& out, const RunRecord& record);

struct EvalResult {
  double accuracy = 0.0;   // exact match over all M attributes
  double mean_loss = 0.0;  // cross-entropy averaged over instances and heads
};

/// Scores the snapshot with k_eval experts per token; each head predicts its
/// highest-scoring value token. The model's parameters and inference k are left
/// as they were. ConfigError for an empty snapshot or k_eval outside [1, T].
EvalResult evaluate(model::SMoETransformer& model, std::span<const sraven::SravenInstance> snapshot,
                    std::size_t k_eval, int p);

/// Tokens and targets for a batch of instances; targets are ordered to match
/// the model's logit rows.
std::pair<model::TokenBatch, std::vector<std::size_t>> make_batch(
    std::span<const sraven::SravenInstance> instances, int p);

/// Raised when the training loss stops being finite.
class TrainingDiverged : public NumericDomainError {
 public:
  TrainingDiverged(std::size_t step, double loss, std::vector<std::pair<std::string, double>> norms);
  std::size_t step() const { return step_; }
  double loss() const { return loss_; }
  /// L2 norm of every parameter at the failing step.
  const std::vector<std::pair<std::string, double>>& parameter_norms() const { return norms_; }

 private:
  std::size_t step_;
  double loss_;
  std::vector<std::pair<std::string, double>> norms_;
};

/// Owns the model, optimizer and data streams of one run.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  /// Runs exactly config.steps optimizer steps and returns the record.
  /// Throws TrainingDiverged on a non-finite loss.
  RunRecord run();

  /// Called after every step with (step, loss).
  std::function<void(std::size_t, double)> on_step;

  model::SMoETransformer& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  const sraven::SplitSpec& split() const { return split_; }
  const std::vector<sraven::SravenInstance>& test_snapshot() const { return test_; }
  const std::vector<sraven::SravenInstance>& ood_snapshot() const { return ood_; }
  /// The memorized instance when single_instance is set.
  const sraven::SravenInstance& fixed_instance() const { return fixed_; }

 private:
  double step_once(std::size_t step, std::vector<ExpertUsageRecord>& usage);

  TrainConfig config_;
  model::SMoETransformer model_;
  sraven::SplitSpec split_;
  std::vector<sraven::SravenInstance> test_;
  std::vector<sraven::SravenInstance> ood_;
  sraven::SravenInstance fixed_;
  Rng data_rng_;
  nn::OptimizerState optimizer_;
};

/// Trainer(config).run().
RunRecord train(const TrainConfig& config);

}  // namespace smoe::trainer
