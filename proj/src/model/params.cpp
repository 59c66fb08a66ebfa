// SPDX-License-Identifier: Apache-2.0
#include "smoe/model/params.hpp"

#include <random>

namespace smoe::model {

nn::Tensor normal_param(nn::Shape shape, double stddev, Rng& rng) {
  nn::Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data()) v = dist(rng);
  t.set_requires_grad(true);
  return t;
}

nn::Tensor constant_param(nn::Shape shape, double value) {
  nn::Tensor t(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

}  // namespace smoe::model
