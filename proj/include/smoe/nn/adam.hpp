// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "smoe/nn/tensor.hpp"

namespace smoe::nn {

struct OptimizerState {
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// One moment buffer per parameter; empty until the first step.
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// Bias-corrected adaptive-moment update of every parameter from its grad
/// buffer. Moments are lazily sized on the first call; afterwards their shapes
/// must match the parameters exactly (ContractViolation otherwise).
void adam_step(std::span<Tensor* const> params, OptimizerState& state);

/// Same update over raw spans, one (param, grad) pair per slot.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, OptimizerState& state);

/// Scales all gradients so their joint L2 norm is at most max_norm. Returns
/// the norm before clipping.
double clip_grad_norm(std::span<Tensor* const> params, double max_norm);

}  // namespace smoe::nn
