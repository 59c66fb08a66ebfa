// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "smoe/common/rng.hpp"
#include "smoe/nn/tensor.hpp"

namespace smoe::model {

struct NamedParam {
  std::string name;
  nn::Tensor* tensor;
};

using ParamList = std::vector<NamedParam>;

/// Trainable tensor drawn from N(0, stddev^2).
nn::Tensor normal_param(nn::Shape shape, double stddev, Rng& rng);
/// Trainable tensor filled with `value`.
nn::Tensor constant_param(nn::Shape shape, double value);

}  // namespace smoe::model
