// SPDX-License-Identifier: Apache-2.0
#include "smoe/nn/adam.hpp"

#include <cmath>
#include <string>

#include "smoe/common/error.hpp"

namespace smoe::nn {

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, OptimizerState& state) {
  if (params.size() != grads.size()) {
    throw ContractViolation("adam_step: " + std::to_string(params.size()) + " params but " +
                            std::to_string(grads.size()) + " grads");
  }
  if (state.first_moment.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ContractViolation("adam_step: optimizer state tracks a different parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].size() || state.first_moment[i].size() != params[i].size() ||
        state.second_moment[i].size() != params[i].size()) {
      throw ContractViolation("adam_step: shape mismatch at parameter " + std::to_string(i));
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double corr1 = 1.0 - std::pow(state.beta1, t);
  const double corr2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    auto g = grads[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / corr1;
      const double vhat = v[j] / corr2;
      p[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

void adam_step(std::span<Tensor* const> params, OptimizerState& state) {
  std::vector<std::span<double>> ps;
  std::vector<std::span<const double>> gs;
  ps.reserve(params.size());
  gs.reserve(params.size());
  for (Tensor* p : params) {
    if (!p->requires_grad()) throw ContractViolation("adam_step: parameter without grad buffer");
    ps.push_back(p->data());
    gs.push_back(p->grad());
  }
  adam_step(std::span<const std::span<double>>(ps), std::span<const std::span<const double>>(gs),
            state);
}

double clip_grad_norm(std::span<Tensor* const> params, double max_norm) {
  double sq = 0.0;
  for (const Tensor* p : params)
    for (double g : p->grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Tensor* p : params)
      for (double& g : p->grad()) g *= factor;
  }
  return norm;
}

}  // namespace smoe::nn
