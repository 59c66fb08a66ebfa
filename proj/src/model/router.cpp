// SPDX-License-Identifier: Apache-2.0
#include "smoe/model/router.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smoe/common/error.hpp"
#include "smoe/nn/ops.hpp"

namespace smoe::model {

namespace {

void check_k(std::size_t k, std::size_t num_experts) {
  if (k < 1 || k > num_experts) {
    throw ConfigError("routing k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(num_experts) + "]");
  }
}

// Writes softmax over the selected entries of `logits` into `weights`
// (other entries untouched). `selected` must be non-empty.
void selected_softmax(std::span<const double> logits, std::span<const std::size_t> selected,
                      std::span<double> weights) {
  double mx = logits[selected[0]];
  for (auto j : selected) mx = std::max(mx, logits[j]);
  double total = 0.0;
  for (auto j : selected) {
    weights[j] = std::exp(logits[j] - mx);
    total += weights[j];
  }
  for (auto j : selected) weights[j] /= total;
}

}  // namespace

RouterOutput route(std::span<const double> logits, std::size_t k) {
  check_k(k, logits.size());
  for (double v : logits) {
    if (!std::isfinite(v)) throw NumericDomainError("route: non-finite router logit");
  }
  RouterOutput out;
  out.logits.assign(logits.begin(), logits.end());
  out.selected = nn::top_k_indices(logits, k);
  std::sort(out.selected.begin(), out.selected.end());
  out.weights.assign(logits.size(), 0.0);
  selected_softmax(logits, out.selected, out.weights);
  return out;
}

nn::Var top_k_gate(nn::Tape& tape, nn::Var logits, std::size_t k,
                   std::vector<std::vector<std::size_t>>* selections) {
  const nn::Tensor& lv = tape.value(logits);
  if (lv.rank() != 2) throw ContractViolation("top_k_gate: logits must be [n x T]");
  const std::size_t n = lv.dim(0);
  const std::size_t num_experts = lv.dim(1);
  check_k(k, num_experts);
  for (double v : lv.data()) {
    if (!std::isfinite(v)) throw NumericDomainError("top_k_gate: non-finite router logit");
  }

  nn::Tensor weights({n, num_experts});
  std::vector<std::size_t> chosen(n * k);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = lv.data().subspan(r * num_experts, num_experts);
    auto sel = nn::top_k_indices(row, k);
    std::sort(sel.begin(), sel.end());
    std::copy(sel.begin(), sel.end(), chosen.begin() + static_cast<std::ptrdiff_t>(r * k));
    selected_softmax(row, sel, weights.data().subspan(r * num_experts, num_experts));
  }
  if (selections) {
    selections->assign(n, {});
    for (std::size_t r = 0; r < n; ++r) {
      (*selections)[r].assign(chosen.begin() + static_cast<std::ptrdiff_t>(r * k),
                              chosen.begin() + static_cast<std::ptrdiff_t>((r + 1) * k));
    }
  }
  nn::Var out{tape.size()};
  return tape.record(std::move(weights), {logits},
                     [logits, out, n, k, num_experts, chosen = std::move(chosen)](
                         nn::Tape& t, std::span<const double> g) {
                       auto d = t.grad(logits);
                       const auto w = t.value(out).data();
                       for (std::size_t r = 0; r < n; ++r) {
                         const std::size_t base = r * num_experts;
                         double dot = 0.0;
                         for (std::size_t s = 0; s < k; ++s) {
                           const std::size_t j = chosen[r * k + s];
                           dot += g[base + j] * w[base + j];
                         }
                         for (std::size_t s = 0; s < k; ++s) {
                           const std::size_t j = chosen[r * k + s];
                           d[base + j] += w[base + j] * (g[base + j] - dot);
                         }
                       }
                     });
}

}  // namespace smoe::model
