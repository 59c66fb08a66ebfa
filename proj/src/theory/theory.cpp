// SPDX-License-Identifier: Apache-2.0
#include "smoe/theory/theory.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "smoe/common/error.hpp"
#include "smoe/common/format.hpp"
#include "smoe/common/hash.hpp"
#include "smoe/common/rng.hpp"

namespace smoe::theory {

namespace {

void check_k(std::size_t k, std::size_t T) {
  if (k < 1 || k > T) {
    throw ConfigError("k=" + std::to_string(k) + " outside [1, T=" + std::to_string(T) + "]");
  }
}

double log_choose(std::size_t n, std::size_t k) {
  const auto x = static_cast<double>(n);
  const auto y = static_cast<double>(k);
  return std::lgamma(x + 1.0) - std::lgamma(y + 1.0) - std::lgamma(x - y + 1.0);
}

}  // namespace

std::string variant_name(EstimationVariant v) {
  return v == EstimationVariant::kPaperLiteral ? "PAPER_LITERAL" : "THEOREM_CONSISTENT";
}

EstimationVariant variant_from_name(const std::string& name) {
  if (name == "PAPER_LITERAL") return EstimationVariant::kPaperLiteral;
  if (name == "THEOREM_CONSISTENT") return EstimationVariant::kTheoremConsistent;
  throw ConfigError("unknown estimation variant '" + name + "'");
}

void ErrorModelParams::validate() const {
  if (N < 1) throw ConfigError("theory.N must be positive");
  if (T < 1) throw ConfigError("theory.T must be positive");
  if (!(d_N > 0.0) || !std::isfinite(d_N)) throw ConfigError("theory.d_N must be positive");
  if (m < 1) throw ConfigError("theory.m must be positive");
  if (!(c1 >= 0.0) || !(c2 >= 0.0) || !std::isfinite(c1) || !std::isfinite(c2)) {
    throw ConfigError("theory.c1 and theory.c2 must be non-negative");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("theory.delta must lie in (0, 1)");
}

void to_json(nlohmann::json& j, const ErrorModelParams& p) {
  j = nlohmann::json{{"N", p.N},   {"T", p.T},   {"d_N", p.d_N},     {"m", p.m},
                     {"c1", p.c1}, {"c2", p.c2}, {"delta", p.delta}, {"variant", variant_name(p.variant)}};
}

void from_json(const nlohmann::json& j, ErrorModelParams& p) {
  if (!j.is_object()) throw ConfigError("theory parameter set must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto count = [&](auto& field) {
      if (!value.is_number_unsigned()) throw ConfigError("theory." + key + " must be a positive integer");
      field = value.template get<std::remove_reference_t<decltype(field)>>();
    };
    auto real = [&](double& field) {
      if (!value.is_number()) throw ConfigError("theory." + key + " must be a number");
      field = value.get<double>();
    };
    if (key == "N") count(p.N);
    else if (key == "T") count(p.T);
    else if (key == "m") count(p.m);
    else if (key == "d_N") real(p.d_N);
    else if (key == "c1") real(p.c1);
    else if (key == "c2") real(p.c2);
    else if (key == "delta") real(p.delta);
    else if (key == "variant") {
      if (!value.is_string()) throw ConfigError("theory.variant must be a string");
      p.variant = variant_from_name(value.get<std::string>());
    } else {
      throw ConfigError("unknown key theory." + key);
    }
  }
}

std::string params_hash(const ErrorModelParams& p) { return hex_digest(nlohmann::json(p).dump()); }

double approx_error(std::size_t k, const ErrorModelParams& p) {
  p.validate();
  check_k(k, p.T);
  const auto n = static_cast<double>(p.N);
  return p.c1 * n * n / static_cast<double>(k);
}

double est_error(std::size_t k, const ErrorModelParams& p) {
  p.validate();
  check_k(k, p.T);
  const double base = static_cast<double>(p.N) * static_cast<double>(k) * p.d_N / static_cast<double>(p.m);
  if (p.variant == EstimationVariant::kPaperLiteral) {
    if (k == p.T) return 0.0;
    return p.c2 * std::sqrt(base * std::log(static_cast<double>(p.T) / static_cast<double>(k)));
  }
  return p.c2 * std::sqrt(base * std::log(static_cast<double>(p.T)));
}

double total_error(std::size_t k, const ErrorModelParams& p) {
  return approx_error(k, p) + est_error(k, p);
}

std::vector<ErrorCurvePoint> error_curve(const ErrorModelParams& p) {
  p.validate();
  std::vector<ErrorCurvePoint> out;
  out.reserve(p.T);
  for (std::size_t k = 1; k <= p.T; ++k) {
    const double a = approx_error(k, p);
    const double e = est_error(k, p);
    out.push_back({k, a, e, a + e});
  }
  return out;
}

OptimalK optimal_k(const ErrorModelParams& p) {
  OptimalK result;
  for (const auto& point : error_curve(p)) {
    result.curve.push_back(point.total);
    if (result.k_star == 0 || point.total < result.curve[result.k_star - 1]) result.k_star = point.k;
  }
  return result;
}

double optimal_k_continuous(const ErrorModelParams& p) {
  p.validate();
  if (p.variant != EstimationVariant::kTheoremConsistent) {
    throw UnsupportedVariant("continuous k* needs the THEOREM_CONSISTENT estimation term");
  }
  if (p.T < 2) throw ConfigError("continuous k* needs T >= 2");
  if (!(p.c1 > 0.0) || !(p.c2 > 0.0)) throw ConfigError("continuous k* needs c1 > 0 and c2 > 0");
  const double log_t = std::log(static_cast<double>(p.T));
  return std::pow(2.0 * p.c1 / p.c2, 2.0 / 3.0) * static_cast<double>(p.N) *
         std::cbrt(static_cast<double>(p.m) / (p.d_N * log_t));
}

double theorem1_bound(double C, double R_m, std::size_t k, std::size_t N, double d_N,
                      std::size_t T, double m, double delta) {
  if (!(C >= 0.0) || !(R_m >= 0.0) || !(d_N >= 0.0)) {
    throw ConfigError("theorem1_bound: C, R_m and d_N must be non-negative");
  }
  if (N < 1 || T < 1) throw ConfigError("theorem1_bound: N and T must be positive");
  if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("theorem1_bound: m must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("theorem1_bound: delta must lie in (0, 1)");
  check_k(k, T);
  const double nd = static_cast<double>(N) * d_N;
  const double numerator = 2.0 * static_cast<double>(k) * nd * std::log(static_cast<double>(T)) +
                           nd * std::log(2.0 * m) + std::log(2.0 / delta);
  return 4.0 * C * R_m + 2.0 * std::sqrt(numerator / (2.0 * m));
}

double routing_pattern_bound(std::size_t T, std::size_t k, std::size_t N, double d_N, double m) {
  if (N < 1) throw ConfigError("routing_pattern_bound: N must be positive");
  if (!(d_N >= 0.0)) throw ConfigError("routing_pattern_bound: d_N must be non-negative");
  if (!(m >= 1.0)) throw ConfigError("routing_pattern_bound: m must be at least 1");
  check_k(k, T);
  const double nd = static_cast<double>(N) * d_N;
  return 2.0 * nd * log_choose(T, k) + nd * std::log(2.0 * m);
}

FunctionTable::FunctionTable(std::vector<std::vector<double>> rows) {
  if (rows.empty()) throw ConfigError("function table needs at least one function");
  rows_ = rows.size();
  cols_ = rows.front().size();
  if (cols_ == 0) throw ConfigError("function table needs at least one sample point");
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ConfigError("function table rows differ in length");
    for (double v : r) {
      if (!std::isfinite(v)) throw ConfigError("function table entries must be finite");
      values_.push_back(v);
    }
  }
}

RademacherEstimate rademacher_mc(const FunctionTable& table, std::size_t num_draws,
                                 std::uint64_t seed) {
  if (num_draws == 0) throw ConfigError("rademacher_mc: num_draws must be positive");
  const std::size_t m = table.sample_size();
  const std::size_t h = table.num_functions();
  Rng rng(derive_seed(seed, "rademacher"));
  std::vector<double> sigma(m);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t draw = 0; draw < num_draws; ++draw) {
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (i % 64 == 0) bits = rng();
      sigma[i] = (bits & 1U) ? 1.0 : -1.0;
      bits >>= 1;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < h; ++f) {
      const auto row = table.row(f);
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += sigma[i] * row[i];
      best = std::max(best, s / static_cast<double>(m));
    }
    // Welford running moments.
    const double delta = best - mean;
    mean += delta / static_cast<double>(draw + 1);
    m2 += delta * (best - mean);
  }
  RademacherEstimate out;
  out.estimate = mean;
  out.std_error = num_draws > 1
                      ? std::sqrt(m2 / static_cast<double>(num_draws - 1) / static_cast<double>(num_draws))
                      : std::numeric_limits<double>::quiet_NaN();
  return out;
}

Matrix powerlaw_weights(std::span<const double> d, double alpha) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) throw ConfigError("powerlaw_weights: alpha must exceed 1");
  if (d.empty()) throw ConfigError("powerlaw_weights: need at least one task");
  for (double v : d) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError("powerlaw_weights: difficulty inverses must be positive");
    }
  }
  const std::size_t n = d.size();
  Matrix w(n, std::vector<double>(n));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      w[i][j] = std::pow(d[i] + d[j], -alpha);
      total += w[i][j];
    }
  }
  const double scale = static_cast<double>(n * n) / total;
  for (auto& row : w)
    for (double& v : row) v *= scale;
  return w;
}

double weighted_approx_error(const Matrix& weights, std::size_t k, double c1) {
  if (k < 1) throw ConfigError("weighted_approx_error: k must be at least 1");
  double total = 0.0;
  for (const auto& row : weights) {
    if (row.size() != weights.size()) throw ConfigError("weighted_approx_error: weights must be square");
    for (double v : row) total += v;
  }
  return c1 * total / static_cast<double>(k);
}

void write_error_curve_csv(std::ostream& out, const ErrorModelParams& p) {
  const auto curve = error_curve(p);
  out << "k,approx,est,total\n";
  for (const auto& c : curve) {
    out << c.k << ',' << format_double(c.approx) << ',' << format_double(c.est) << ','
        << format_double(c.total) << '\n';
  }
}

}  // namespace smoe::theory
