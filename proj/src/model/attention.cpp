// SPDX-License-Identifier: Apache-2.0
#include "smoe/model/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smoe/common/error.hpp"
#include "smoe/nn/ops.hpp"

namespace smoe::model {

namespace {

std::size_t bias_index(std::size_t query_pos, std::size_t key_pos, std::size_t window) {
  const auto w = static_cast<std::ptrdiff_t>(window);
  const auto dist = std::clamp(static_cast<std::ptrdiff_t>(query_pos) -
                                   static_cast<std::ptrdiff_t>(key_pos),
                               -w, w);
  return static_cast<std::size_t>(dist + w);
}

}  // namespace

MultiHeadAttention::MultiHeadAttention(std::size_t d_model, std::size_t num_heads,
                                       std::size_t window, std::size_t max_seq_len, Rng& rng,
                                       bool causal)
    : wq(normal_param({d_model, d_model}, 1.0 / std::sqrt(static_cast<double>(d_model)), rng)),
      wk(normal_param({d_model, d_model}, 1.0 / std::sqrt(static_cast<double>(d_model)), rng)),
      wv(normal_param({d_model, d_model}, 1.0 / std::sqrt(static_cast<double>(d_model)), rng)),
      wo(normal_param({d_model, d_model}, 1.0 / std::sqrt(static_cast<double>(d_model)), rng)),
      rel_bias(constant_param({num_heads, 2 * window + 1}, 0.0)),
      num_heads_(num_heads),
      window_(window),
      max_seq_len_(max_seq_len),
      causal_(causal) {
  if (num_heads == 0 || d_model % num_heads != 0) {
    throw ConfigError("attention: d_model must be divisible by num_heads");
  }
}

nn::Var MultiHeadAttention::forward(nn::Tape& tape, nn::Var x, std::size_t batch,
                                    std::size_t query_from) {
  using namespace nn::ops;
  const nn::Tensor& xv = tape.value(x);
  const std::size_t d = wq.dim(0);
  if (xv.rank() != 2 || xv.dim(1) != d || batch == 0 || xv.dim(0) % batch != 0) {
    throw ContractViolation("attention: input " + nn::shape_string(xv.shape()) +
                            " is not [batch*seq x " + std::to_string(d) + "]");
  }
  const std::size_t seq = xv.dim(0) / batch;
  if (seq > max_seq_len_) {
    throw ConfigError("attention: sequence length " + std::to_string(seq) + " exceeds max_seq_len " +
                      std::to_string(max_seq_len_));
  }
  if (query_from >= seq) throw ContractViolation("attention: query_from beyond sequence end");

  nn::Var xq = x;
  if (query_from > 0) {
    std::vector<std::size_t> rows;
    rows.reserve(batch * (seq - query_from));
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t s = query_from; s < seq; ++s) rows.push_back(b * seq + s);
    xq = gather_rows(tape, x, rows);
  }
  const std::size_t head_dim = d / num_heads_;
  auto q = split_heads(tape, matmul(tape, xq, tape.parameter(wq)), batch, num_heads_);
  auto k = split_heads(tape, matmul(tape, x, tape.parameter(wk)), batch, num_heads_);
  auto v = split_heads(tape, matmul(tape, x, tape.parameter(wv)), batch, num_heads_);

  auto scores = scale(tape, bmm(tape, q, k, /*transpose_b=*/true),
                      1.0 / std::sqrt(static_cast<double>(head_dim)));
  scores = add_relative_bias(tape, scores, tape.parameter(rel_bias), batch, num_heads_, query_from,
                             window_);
  auto probs = causal_ ? causal_softmax(tape, scores, query_from) : softmax_rows(tape, scores);
  auto context = merge_heads(tape, bmm(tape, probs, v), batch, num_heads_);
  return matmul(tape, context, tape.parameter(wo));
}

void MultiHeadAttention::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".wq", &wq});
  out.push_back({prefix + ".wk", &wk});
  out.push_back({prefix + ".wv", &wv});
  out.push_back({prefix + ".wo", &wo});
  out.push_back({prefix + ".rel_bias", &rel_bias});
}

nn::Var add_relative_bias(nn::Tape& tape, nn::Var scores, nn::Var table, std::size_t batch,
                          std::size_t heads, std::size_t q_offset, std::size_t window) {
  const nn::Tensor& sv = tape.value(scores);
  const nn::Tensor& tv = tape.value(table);
  if (sv.rank() != 3 || sv.dim(0) != batch * heads) {
    throw ContractViolation("add_relative_bias: scores must be [B*H x Sq x Sk]");
  }
  if (tv.rank() != 2 || tv.dim(0) != heads || tv.dim(1) != 2 * window + 1) {
    throw ContractViolation("add_relative_bias: table must be [H x (2W+1)]");
  }
  const std::size_t sq = sv.dim(1);
  const std::size_t sk = sv.dim(2);
  const std::size_t width = tv.dim(1);
  // Bucket of every (i, j) pair; identical across batch and heads.
  std::vector<std::size_t> bucket(sq * sk);
  for (std::size_t i = 0; i < sq; ++i)
    for (std::size_t j = 0; j < sk; ++j) bucket[i * sk + j] = bias_index(q_offset + i, j, window);

  nn::Tensor out = sv;
  for (std::size_t g = 0; g < batch * heads; ++g) {
    const std::size_t h = g % heads;
    double* row = out.data().data() + g * sq * sk;
    for (std::size_t e = 0; e < sq * sk; ++e) row[e] += tv[h * width + bucket[e]];
  }
  return tape.record(std::move(out), {scores, table},
                     [scores, table, batch, heads, sq, sk, width, bucket = std::move(bucket)](
                         nn::Tape& t, std::span<const double> g) {
                       if (t.needs_grad(scores)) {
                         auto d = t.grad(scores);
                         for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                       }
                       if (t.needs_grad(table)) {
                         auto d = t.grad(table);
                         for (std::size_t gi = 0; gi < batch * heads; ++gi) {
                           const std::size_t h = gi % heads;
                           const double* row = g.data() + gi * sq * sk;
                           for (std::size_t e = 0; e < sq * sk; ++e) d[h * width + bucket[e]] += row[e];
                         }
                       }
                     });
}

}  // namespace smoe::model
