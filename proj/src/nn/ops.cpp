// SPDX-License-Identifier: Apache-2.0
#include "smoe/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "smoe/common/error.hpp"

namespace smoe::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

using ArrMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrMap = Eigen::Map<const Eigen::ArrayXd>;

constexpr double kGeluScale = 1.5957691216057307;  // 2 * sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;

std::size_t last_dim(const Shape& s) { return s.back(); }
std::size_t leading_rows(const Shape& s) { return shape_numel(s) / s.back(); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

void check_finite(std::span<const double> xs, const char* op) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw NumericDomainError(std::string(op) + ": non-finite input");
  }
}

// Softmax of one contiguous row in place (max-subtracted).
void softmax_inplace(std::span<double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    total += v;
  }
  const double inv = 1.0 / total;
  for (double& v : row) v *= inv;
}

// dx = y * (dy - <dy, y>) for one softmax row.
void softmax_row_backward(std::span<const double> y, std::span<const double> dy,
                          std::span<double> dx) {
  double dot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += dy[i] * y[i];
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] += y[i] * (dy[i] - dot);
}

}  // namespace

Tensor softmax(const Tensor& logits, std::size_t axis) {
  if (axis >= logits.rank()) {
    throw ContractViolation("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                            shape_string(logits.shape()));
  }
  check_finite(logits.data(), "softmax");
  const Shape& s = logits.shape();
  const std::size_t len = s[axis];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t outer = logits.numel() / (len * inner);

  Tensor out = logits;
  std::vector<double> row(len);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      for (std::size_t j = 0; j < len; ++j) row[j] = out[base + j * inner];
      softmax_inplace(row);
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] = row[j];
    }
  }
  return out;
}

double cross_entropy(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw IndexError("cross_entropy: class " + std::to_string(target) + " outside [0, " +
                     std::to_string(logits.size()) + ")");
  }
  check_finite(logits, "cross_entropy");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - mx);
  return std::log(total) + mx - logits[target];
}

std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k) {
  if (k > values.size()) {
    throw ContractViolation("top_k_indices: k=" + std::to_string(k) + " exceeds length " +
                            std::to_string(values.size()));
  }
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return values[a] > values[b] || (values[a] == values[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

namespace ops {

Var matmul(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(0),
          "matmul: incompatible shapes " + shape_string(av.shape()) + " . " +
              shape_string(bv.shape()));
  const auto n = static_cast<Eigen::Index>(av.dim(0));
  const auto k = static_cast<Eigen::Index>(av.dim(1));
  const auto m = static_cast<Eigen::Index>(bv.dim(1));
  Tensor out({av.dim(0), bv.dim(1)});
  MatMap(out.data().data(), n, m).noalias() =
      ConstMatMap(av.data().data(), n, k) * ConstMatMap(bv.data().data(), k, m);
  return tape.record(std::move(out), {a, b}, [a, b, n, k, m](Tape& t, std::span<const double> g) {
    ConstMatMap dc(g.data(), n, m);
    if (t.needs_grad(a)) {
      MatMap(t.grad(a).data(), n, k).noalias() +=
          dc * ConstMatMap(t.value(b).data().data(), k, m).transpose();
    }
    if (t.needs_grad(b)) {
      MatMap(t.grad(b).data(), k, m).noalias() +=
          ConstMatMap(t.value(a).data().data(), n, k).transpose() * dc;
    }
  });
}

Var bmm(Tape& tape, Var a, Var b, bool transpose_b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require(av.rank() == 3 && bv.rank() == 3 && av.dim(0) == bv.dim(0),
          "bmm: expected matching 3-D operands, got " + shape_string(av.shape()) + " and " +
              shape_string(bv.shape()));
  const std::size_t batch = av.dim(0);
  const auto n = static_cast<Eigen::Index>(av.dim(1));
  const auto k = static_cast<Eigen::Index>(av.dim(2));
  const auto m = static_cast<Eigen::Index>(transpose_b ? bv.dim(1) : bv.dim(2));
  require(static_cast<Eigen::Index>(transpose_b ? bv.dim(2) : bv.dim(1)) == k,
          "bmm: inner dimensions differ");
  const std::size_t a_step = static_cast<std::size_t>(n * k);
  const std::size_t b_step = static_cast<std::size_t>(k * m);
  const std::size_t c_step = static_cast<std::size_t>(n * m);

  Tensor out({batch, static_cast<std::size_t>(n), static_cast<std::size_t>(m)});
  for (std::size_t i = 0; i < batch; ++i) {
    ConstMatMap am(av.data().data() + i * a_step, n, k);
    MatMap cm(out.data().data() + i * c_step, n, m);
    if (transpose_b) {
      cm.noalias() = am * ConstMatMap(bv.data().data() + i * b_step, m, k).transpose();
    } else {
      cm.noalias() = am * ConstMatMap(bv.data().data() + i * b_step, k, m);
    }
  }
  return tape.record(
      std::move(out), {a, b},
      [=](Tape& t, std::span<const double> g) {
        const double* ad = t.value(a).data().data();
        const double* bd = t.value(b).data().data();
        const bool ga = t.needs_grad(a);
        const bool gb = t.needs_grad(b);
        double* da = ga ? t.grad(a).data() : nullptr;
        double* db = gb ? t.grad(b).data() : nullptr;
        for (std::size_t i = 0; i < batch; ++i) {
          ConstMatMap dc(g.data() + i * c_step, n, m);
          if (transpose_b) {
            // C = A B^T: dA = dC B, dB = dC^T A
            if (ga) MatMap(da + i * a_step, n, k).noalias() += dc * ConstMatMap(bd + i * b_step, m, k);
            if (gb) MatMap(db + i * b_step, m, k).noalias() += dc.transpose() * ConstMatMap(ad + i * a_step, n, k);
          } else {
            if (ga) MatMap(da + i * a_step, n, k).noalias() += dc * ConstMatMap(bd + i * b_step, k, m).transpose();
            if (gb) MatMap(db + i * b_step, k, m).noalias() += ConstMatMap(ad + i * a_step, n, k).transpose() * dc;
          }
        }
      });
}

Var add(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same_shape(av, bv, "add");
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    for (Var v : {a, b}) {
      if (!t.needs_grad(v)) continue;
      auto d = t.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
  });
}

Var add_bias(Tape& tape, Var x, Var bias) {
  const Tensor& xv = tape.value(x);
  const Tensor& bv = tape.value(bias);
  const std::size_t m = last_dim(xv.shape());
  require(bv.numel() == m, "add_bias: bias length " + std::to_string(bv.numel()) +
                               " does not match row width " + std::to_string(m));
  const std::size_t rows = leading_rows(xv.shape());
  Tensor out = xv;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < m; ++j) out[r * m + j] += bv[j];
  }
  return tape.record(std::move(out), {x, bias}, [x, bias, rows, m](Tape& t, std::span<const double> g) {
    if (t.needs_grad(x)) {
      auto d = t.grad(x);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (t.needs_grad(bias)) {
      auto d = t.grad(bias);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < m; ++j) d[j] += g[r * m + j];
      }
    }
  });
}

Var mul(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    if (t.needs_grad(a)) {
      auto d = t.grad(a);
      const auto other = t.value(b).data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * other[i];
    }
    if (t.needs_grad(b)) {
      auto d = t.grad(b);
      const auto other = t.value(a).data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * other[i];
    }
  });
}

Var scale(Tape& tape, Var x, double factor) {
  Tensor out = tape.value(x);
  for (double& v : out.data()) v *= factor;
  return tape.record(std::move(out), {x}, [x, factor](Tape& t, std::span<const double> g) {
    auto d = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += factor * g[i];
  });
}

Var relu(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return tape.record(std::move(out), {x}, [x](Tape& t, std::span<const double> g) {
    auto d = t.grad(x);
    const auto xv = t.value(x).data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) d[i] += g[i];
    }
  });
}

Var gelu(Tape& tape, Var x) {
  // x * sigmoid(v), v = 2 sqrt(2/pi) (x + 0.044715 x^3): the tanh form of GELU.
  const Tensor& xv = tape.value(x);
  const auto n = static_cast<Eigen::Index>(xv.numel());
  ConstArrMap in(xv.data().data(), n);
  Eigen::ArrayXd sig = (1.0 + (-kGeluScale * (in + kGeluCubic * in.cube())).exp()).inverse();
  Tensor out(xv.shape());
  ArrMap(out.data().data(), n) = in * sig;
  return tape.record(std::move(out), {x}, [x, n, sig = std::move(sig)](Tape& t, std::span<const double> g) {
    ConstArrMap xs(t.value(x).data().data(), n);
    const auto dv = kGeluScale * (1.0 + 3.0 * kGeluCubic * xs.square());
    ArrMap(t.grad(x).data(), n) += ConstArrMap(g.data(), n) * (sig + xs * sig * (1.0 - sig) * dv);
  });
}

Var layer_norm(Tape& tape, Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = tape.value(x);
  const std::size_t d = last_dim(xv.shape());
  const std::size_t rows = leading_rows(xv.shape());
  require(tape.value(gain).numel() == d && tape.value(bias).numel() == d,
          "layer_norm: gain/bias width mismatch");
  const auto gv = tape.value(gain).data();
  const auto bv = tape.value(bias).data();

  Tensor out(xv.shape());
  // Saved per-row normalized values and inverse std for the backward pass.
  std::vector<double> xhat(xv.numel());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data().data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * inv;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return tape.record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape& t, std::span<const double> g) {
        if (t.needs_grad(gain)) {
          auto dg = t.grad(gain);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) dg[j] += g[r * d + j] * xhat[r * d + j];
        }
        if (t.needs_grad(bias)) {
          auto db = t.grad(bias);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) db[j] += g[r * d + j];
        }
        if (t.needs_grad(x)) {
          auto dx = t.grad(x);
          const auto gv = t.value(gain).data();
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double sum_dh = 0.0;
            double sum_dh_h = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * gv[j];
              sum_dh += dh;
              sum_dh_h += dh * xhat[r * d + j];
            }
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * gv[j];
              dx[r * d + j] +=
                  inv_std[r] * (dh - inv_d * sum_dh - xhat[r * d + j] * inv_d * sum_dh_h);
            }
          }
        }
      });
}

Var embedding(Tape& tape, Var table, std::span<const std::size_t> ids) {
  const Tensor& tv = tape.value(table);
  require(tv.rank() == 2, "embedding: table must be 2-D");
  const std::size_t vocab = tv.dim(0);
  const std::size_t d = tv.dim(1);
  require(!ids.empty(), "embedding: no ids");
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw IndexError("embedding: id " + std::to_string(ids[i]) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
    std::copy_n(tv.data().begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  std::vector<std::size_t> saved(ids.begin(), ids.end());
  return tape.record(std::move(out), {table},
                     [table, d, saved = std::move(saved)](Tape& t, std::span<const double> g) {
                       auto dt = t.grad(table);
                       for (std::size_t i = 0; i < saved.size(); ++i)
                         for (std::size_t j = 0; j < d; ++j) dt[saved[i] * d + j] += g[i * d + j];
                     });
}

Var softmax_rows(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  check_finite(xv.data(), "softmax");
  const std::size_t d = last_dim(xv.shape());
  const std::size_t rows = leading_rows(xv.shape());
  Tensor out = xv;
  for (std::size_t r = 0; r < rows; ++r) softmax_inplace(out.data().subspan(r * d, d));
  Var y{tape.size()};
  return tape.record(std::move(out), {x}, [x, y, d, rows](Tape& t, std::span<const double> g) {
    auto dx = t.grad(x);
    const auto yv = t.value(y).data();
    for (std::size_t r = 0; r < rows; ++r) {
      softmax_row_backward(yv.subspan(r * d, d), g.subspan(r * d, d), dx.subspan(r * d, d));
    }
  });
}

Var causal_softmax(Tape& tape, Var scores, std::size_t q_offset) {
  const Tensor& sv = tape.value(scores);
  require(sv.rank() == 3, "causal_softmax: scores must be [G x Sq x Sk]");
  check_finite(sv.data(), "causal_softmax");
  const std::size_t groups = sv.dim(0);
  const std::size_t sq = sv.dim(1);
  const std::size_t sk = sv.dim(2);
  require(q_offset + sq <= sk, "causal_softmax: query rows extend past the key length");
  Tensor out(sv.shape());
  for (std::size_t gi = 0; gi < groups; ++gi) {
    for (std::size_t i = 0; i < sq; ++i) {
      const std::size_t base = (gi * sq + i) * sk;
      const std::size_t visible = q_offset + i + 1;
      std::copy_n(sv.data().begin() + static_cast<std::ptrdiff_t>(base), visible,
                  out.data().begin() + static_cast<std::ptrdiff_t>(base));
      softmax_inplace(out.data().subspan(base, visible));
    }
  }
  Var y{tape.size()};
  return tape.record(std::move(out), {scores},
                     [scores, y, groups, sq, sk, q_offset](Tape& t, std::span<const double> g) {
                       auto dx = t.grad(scores);
                       const auto yv = t.value(y).data();
                       for (std::size_t gi = 0; gi < groups; ++gi) {
                         for (std::size_t i = 0; i < sq; ++i) {
                           const std::size_t base = (gi * sq + i) * sk;
                           const std::size_t visible = q_offset + i + 1;
                           softmax_row_backward(yv.subspan(base, visible), g.subspan(base, visible),
                                                dx.subspan(base, visible));
                         }
                       }
                     });
}

Var cross_entropy_mean(Tape& tape, Var logits, std::span<const std::size_t> targets) {
  const Tensor& lv = tape.value(logits);
  const std::size_t c = last_dim(lv.shape());
  const std::size_t rows = leading_rows(lv.shape());
  require(targets.size() == rows, "cross_entropy_mean: " + std::to_string(targets.size()) +
                                      " targets for " + std::to_string(rows) + " rows");
  Tensor probs = lv;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    total += cross_entropy(lv.data().subspan(r * c, c), targets[r]);
    softmax_inplace(probs.data().subspan(r * c, c));
  }
  std::vector<std::size_t> saved(targets.begin(), targets.end());
  return tape.record(Tensor::scalar(total / static_cast<double>(rows)), {logits},
                     [logits, c, rows, probs = std::move(probs), saved = std::move(saved)](
                         Tape& t, std::span<const double> g) {
                       auto d = t.grad(logits);
                       const double s = g[0] / static_cast<double>(rows);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t j = 0; j < c; ++j) {
                           const double onehot = (j == saved[r]) ? 1.0 : 0.0;
                           d[r * c + j] += s * (probs[r * c + j] - onehot);
                         }
                       }
                     });
}

Var sum(Tape& tape, Var x) {
  const auto xv = tape.value(x).data();
  double total = 0.0;
  for (double v : xv) total += v;
  return tape.record(Tensor::scalar(total), {x}, [x](Tape& t, std::span<const double> g) {
    auto d = t.grad(x);
    for (double& v : d) v += g[0];
  });
}

Var reshape(Tape& tape, Var x, Shape shape) {
  Tensor out = tape.value(x);
  out.reshape(std::move(shape));
  return tape.record(std::move(out), {x}, [x](Tape& t, std::span<const double> g) {
    auto d = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

Var gather_rows(Tape& tape, Var x, std::span<const std::size_t> rows) {
  const Tensor& xv = tape.value(x);
  const std::size_t d = last_dim(xv.shape());
  const std::size_t n = leading_rows(xv.shape());
  require(!rows.empty(), "gather_rows: empty selection");
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " out of range");
    std::copy_n(xv.data().begin() + static_cast<std::ptrdiff_t>(rows[i] * d), d,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  std::vector<std::size_t> saved(rows.begin(), rows.end());
  return tape.record(std::move(out), {x},
                     [x, d, saved = std::move(saved)](Tape& t, std::span<const double> g) {
                       auto dx = t.grad(x);
                       for (std::size_t i = 0; i < saved.size(); ++i)
                         for (std::size_t j = 0; j < d; ++j) dx[saved[i] * d + j] += g[i * d + j];
                     });
}

namespace {
// Index map between [B*S x H*D] (token-major) and [B*H x S x D] (head-major).
template <typename F>
void for_each_head_element(std::size_t batch, std::size_t seq, std::size_t heads,
                           std::size_t head_dim, F&& f) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t s = 0; s < seq; ++s)
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t tok = ((b * seq + s) * heads + h) * head_dim;
        const std::size_t hm = ((b * heads + h) * seq + s) * head_dim;
        for (std::size_t e = 0; e < head_dim; ++e) f(tok + e, hm + e);
      }
}
}  // namespace

Var split_heads(Tape& tape, Var x, std::size_t batch, std::size_t heads) {
  const Tensor& xv = tape.value(x);
  require(xv.rank() == 2 && xv.dim(0) % batch == 0 && xv.dim(1) % heads == 0,
          "split_heads: shape " + shape_string(xv.shape()) + " not divisible");
  const std::size_t seq = xv.dim(0) / batch;
  const std::size_t hd = xv.dim(1) / heads;
  Tensor out({batch * heads, seq, hd});
  for_each_head_element(batch, seq, heads, hd,
                        [&](std::size_t tok, std::size_t hm) { out[hm] = xv[tok]; });
  return tape.record(std::move(out), {x}, [=](Tape& t, std::span<const double> g) {
    auto d = t.grad(x);
    for_each_head_element(batch, seq, heads, hd,
                          [&](std::size_t tok, std::size_t hm) { d[tok] += g[hm]; });
  });
}

Var merge_heads(Tape& tape, Var x, std::size_t batch, std::size_t heads) {
  const Tensor& xv = tape.value(x);
  require(xv.rank() == 3 && xv.dim(0) == batch * heads, "merge_heads: leading axis mismatch");
  const std::size_t seq = xv.dim(1);
  const std::size_t hd = xv.dim(2);
  Tensor out({batch * seq, heads * hd});
  for_each_head_element(batch, seq, heads, hd,
                        [&](std::size_t tok, std::size_t hm) { out[tok] = xv[hm]; });
  return tape.record(std::move(out), {x}, [=](Tape& t, std::span<const double> g) {
    auto d = t.grad(x);
    for_each_head_element(batch, seq, heads, hd,
                          [&](std::size_t tok, std::size_t hm) { d[hm] += g[tok]; });
  });
}

}  // namespace ops
}  // namespace smoe::nn
