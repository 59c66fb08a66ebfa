// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "oracles.hpp"
#include "smoe/model/smoe_layer.hpp"
#include "smoe/theory/theory.hpp"

namespace fixtures {

inline oracle::Mat as_mat(const smoe::nn::Tensor& t) { return {t.dim(0), t.dim(1), t.values()}; }

// Explicit full-softmax mixture of every expert, with plain loops.
inline std::vector<double> dense_mixture(const smoe::model::SMoELayer& layer, std::span<const double> x) {
  const auto wr = as_mat(layer.router_weights);
  std::vector<double> logits(wr.cols, 0.0);
  for (std::size_t j = 0; j < wr.cols; ++j)
    for (std::size_t i = 0; i < x.size(); ++i) logits[j] += x[i] * wr.at(i, j);
  const auto w = oracle::softmax(logits);
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t j = 0; j < layer.experts.size(); ++j) {
    const auto& e = layer.experts[j];
    const auto y = oracle::mlp(x, as_mat(e.w1), e.b1.data(), as_mat(e.w2), e.b2.data());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w[j] * y[c];
  }
  return out;
}

// Log-uniform draws over wide ranges of every error-model parameter.
inline smoe::theory::ErrorModelParams random_params(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> n(1, 16), t(2, 64);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  smoe::theory::ErrorModelParams p;
  p.N = n(rng);
  p.T = t(rng);
  p.d_N = std::exp(std::log(0.5) + u(rng) * std::log(400.0));
  p.m = static_cast<std::uint64_t>(std::exp(u(rng) * std::log(1e9))) + 1;
  p.c1 = std::exp(std::log(0.1) + u(rng) * std::log(100.0));
  p.c2 = std::exp(std::log(0.1) + u(rng) * std::log(100.0));
  return p;
}

}  // namespace fixtures
