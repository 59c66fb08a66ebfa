// SPDX-License-Identifier: Apache-2.0
#include "smoe/model/smoe_layer.hpp"

#include <cmath>
#include <numeric>

#include "smoe/common/error.hpp"
#include "smoe/model/router.hpp"
#include "smoe/nn/ops.hpp"

namespace smoe::model {

ExpertMLP::ExpertMLP(std::size_t d_model, std::size_t hidden, Rng& rng)
    : w1(normal_param({d_model, hidden}, 1.0 / std::sqrt(static_cast<double>(d_model)), rng)),
      b1(constant_param({hidden}, 0.0)),
      w2(normal_param({hidden, d_model}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng)),
      b2(constant_param({d_model}, 0.0)) {}

nn::Var ExpertMLP::forward(nn::Tape& tape, nn::Var x) {
  using namespace nn::ops;
  auto h = gelu(tape, add_bias(tape, matmul(tape, x, tape.parameter(w1)), tape.parameter(b1)));
  return add_bias(tape, matmul(tape, h, tape.parameter(w2)), tape.parameter(b2));
}

void ExpertMLP::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".w1", &w1});
  out.push_back({prefix + ".b1", &b1});
  out.push_back({prefix + ".w2", &w2});
  out.push_back({prefix + ".b2", &b2});
}

std::uint64_t ExpertUsage::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

double ExpertUsage::entropy() const {
  const double n = static_cast<double>(total());
  if (n == 0.0) return 0.0;
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

SMoELayer::SMoELayer(std::size_t d_model, std::size_t hidden, std::size_t num_experts,
                     std::size_t k_train, Rng& rng)
    : router_weights(normal_param({d_model, num_experts}, 1.0 / std::sqrt(static_cast<double>(d_model)), rng)),
      k_train_(k_train),
      k_infer_(k_train) {
  if (num_experts == 0) throw ConfigError("SMoE layer needs at least one expert");
  if (k_train < 1 || k_train > num_experts) {
    throw ConfigError("k_train=" + std::to_string(k_train) + " outside [1, " +
                      std::to_string(num_experts) + "]");
  }
  experts.reserve(num_experts);
  for (std::size_t j = 0; j < num_experts; ++j) experts.emplace_back(d_model, hidden, rng);
}

void SMoELayer::set_k_train(std::size_t k) {
  if (k < 1 || k > num_experts()) throw ConfigError("k_train outside [1, T]");
  k_train_ = k;
}

void SMoELayer::set_k_infer(std::size_t k) {
  if (k < 1 || k > num_experts()) {
    throw ConfigError("inference k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(num_experts()) + "]");
  }
  k_infer_ = k;
}

nn::Var SMoELayer::forward(nn::Tape& tape, nn::Var x, std::size_t k, ExpertUsage* usage) {
  const nn::Tensor& xv = tape.value(x);
  if (xv.rank() != 2 || xv.dim(1) != d_model()) {
    throw ContractViolation("smoe_forward: input " + nn::shape_string(xv.shape()) +
                            " does not have width " + std::to_string(d_model()));
  }
  const std::size_t n = xv.dim(0);
  auto logits = nn::ops::matmul(tape, x, tape.parameter(router_weights));
  std::vector<std::vector<std::size_t>> selected;
  auto gates = top_k_gate(tape, logits, k, &selected);

  std::vector<std::vector<std::size_t>> rows(num_experts());
  for (std::size_t r = 0; r < n; ++r) {
    for (auto j : selected[r]) rows[j].push_back(r);
  }
  if (usage) {
    usage->counts.resize(num_experts(), 0);
    for (std::size_t j = 0; j < num_experts(); ++j) usage->counts[j] += rows[j].size();
  }

  std::vector<nn::Var> outputs(num_experts());
  for (std::size_t j = 0; j < num_experts(); ++j) {
    if (rows[j].empty()) continue;
    auto xin = rows[j].size() == n ? x : nn::ops::gather_rows(tape, x, rows[j]);
    outputs[j] = experts[j].forward(tape, xin);
  }
  return combine_experts(tape, gates, outputs, rows);
}

void SMoELayer::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".router", &router_weights});
  for (std::size_t j = 0; j < experts.size(); ++j) {
    experts[j].collect(out, prefix + ".expert" + std::to_string(j));
  }
}

nn::Var combine_experts(nn::Tape& tape, nn::Var gates, std::span<const nn::Var> expert_outputs,
                        const std::vector<std::vector<std::size_t>>& expert_rows) {
  const nn::Tensor& gv = tape.value(gates);
  const std::size_t n = gv.dim(0);
  const std::size_t num_experts = gv.dim(1);
  if (expert_outputs.size() != num_experts || expert_rows.size() != num_experts) {
    throw ContractViolation("combine_experts: expected one output and row list per expert");
  }
  std::size_t d = 0;
  std::vector<nn::Var> inputs{gates};
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < num_experts; ++j) {
    if (expert_rows[j].empty()) continue;
    const nn::Tensor& yv = tape.value(expert_outputs[j]);
    if (yv.rank() != 2 || yv.dim(0) != expert_rows[j].size() || (d != 0 && yv.dim(1) != d)) {
      throw ContractViolation("combine_experts: expert " + std::to_string(j) + " output " +
                              nn::shape_string(yv.shape()) + " inconsistent with its rows");
    }
    d = yv.dim(1);
    inputs.push_back(expert_outputs[j]);
    active.push_back(j);
  }
  if (active.empty()) throw ContractViolation("combine_experts: no expert received any row");

  nn::Tensor out({n, d});
  for (auto j : active) {
    const auto y = tape.value(expert_outputs[j]).data();
    const auto& rows = expert_rows[j];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double w = gv[rows[i] * num_experts + j];
      for (std::size_t c = 0; c < d; ++c) out[rows[i] * d + c] += w * y[i * d + c];
    }
  }

  std::vector<nn::Var> outs(expert_outputs.begin(), expert_outputs.end());
  return tape.record(
      std::move(out), inputs,
      [gates, outs = std::move(outs), rows = expert_rows, active = std::move(active), d,
       num_experts](nn::Tape& t, std::span<const double> g) {
        const auto gw = t.value(gates).data();
        const bool gate_grad = t.needs_grad(gates);
        std::span<double> dgates = gate_grad ? t.grad(gates) : std::span<double>{};
        for (auto j : active) {
          const auto y = t.value(outs[j]).data();
          const bool out_grad = t.needs_grad(outs[j]);
          std::span<double> dy = out_grad ? t.grad(outs[j]) : std::span<double>{};
          const auto& rj = rows[j];
          for (std::size_t i = 0; i < rj.size(); ++i) {
            const std::size_t r = rj[i];
            const double w = gw[r * num_experts + j];
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              dot += g[r * d + c] * y[i * d + c];
              if (out_grad) dy[i * d + c] += w * g[r * d + c];
            }
            if (gate_grad) dgates[r * num_experts + j] += dot;
          }
        }
      });
}

}  // namespace smoe::model
