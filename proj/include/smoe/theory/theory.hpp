// SPDX-License-Identifier: Apache-2.0
#pragma once

// Error models for sparse expert routing. Every quantity is "up to constants":
// the hidden O(.) factors are the explicit c1 and c2, logarithms are natural.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace smoe::theory {

/// How the estimation term treats the log factor.
///   kPaperLiteral:      c2 sqrt(N k d / m * ln(T/k)); exactly 0 at k = T.
///   kTheoremConsistent: c2 sqrt(N k d ln(T) / m); matches the 2kNd ln T term
///                       of the generalization bound.
enum class EstimationVariant { kPaperLiteral, kTheoremConsistent };

std::string variant_name(EstimationVariant v);
/// Accepts "PAPER_LITERAL" and "THEOREM_CONSISTENT"; ConfigError otherwise.
EstimationVariant variant_from_name(const std::string& name);

struct ErrorModelParams {
  std::size_t N = 4;      // number of tasks
  std::size_t T = 8;      // total experts
  double d_N = 20.0;      // router base Natarajan dimension
  std::uint64_t m = 10;   // sample count
  double c1 = 1.0;
  double c2 = 1.0;
  double delta = 0.05;
  EstimationVariant variant = EstimationVariant::kTheoremConsistent;

  /// ConfigError naming the first violated constraint.
  void validate() const;
  bool operator==(const ErrorModelParams&) const = default;
};

void to_json(nlohmann::json& j, const ErrorModelParams& p);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ErrorModelParams& p);
/// Hex digest of the canonical JSON form.
std::string params_hash(const ErrorModelParams& p);

/// c1 N^2 / k. ConfigError unless 1 <= k <= T.
double approx_error(std::size_t k, const ErrorModelParams& p);
/// Estimation term per p.variant. ConfigError unless 1 <= k <= T.
double est_error(std::size_t k, const ErrorModelParams& p);
double total_error(std::size_t k, const ErrorModelParams& p);

struct ErrorCurvePoint {
  std::size_t k = 0;
  double approx = 0.0;
  double est = 0.0;
  double total = 0.0;
};

/// One point per k in 1..T.
std::vector<ErrorCurvePoint> error_curve(const ErrorModelParams& p);

struct OptimalK {
  std::size_t k_star = 0;
  std::vector<double> curve;  // total error, curve[k-1]
};

/// Grid argmin of total_error over k in 1..T; ties go to the smallest k.
/// Under kPaperLiteral both terms are smallest at k = T, so k* = T always.
OptimalK optimal_k(const ErrorModelParams& p);

/// Stationary point of c1 N^2/k + c2 sqrt(N k d ln T / m):
/// k* = (2 c1/c2)^(2/3) N (m / (d ln T))^(1/3), unclamped.
/// UnsupportedVariant for kPaperLiteral; ConfigError when T < 2 or a constant is 0.
double optimal_k_continuous(const ErrorModelParams& p);

/// 4 C R_m + 2 sqrt((2 k N d ln T + N d ln(2m) + ln(2/delta)) / (2m)).
/// C, R_m, d_N may be zero; ConfigError for other domain violations.
double theorem1_bound(double C, double R_m, std::size_t k, std::size_t N, double d_N,
                      std::size_t T, double m, double delta);

/// ln of the routing-pattern growth bound C(T,k)^(2Nd) (2m)^(Nd), evaluated in
/// log space. ConfigError unless 1 <= k <= T, N >= 1, m >= 1, d_N >= 0.
double routing_pattern_bound(std::size_t T, std::size_t k, std::size_t N, double d_N, double m);

/// Values of a finite hypothesis class on a fixed sample: row h holds
/// (f_h(z_1), ..., f_h(z_m)).
class FunctionTable {
 public:
  /// ConfigError for no rows, empty or ragged rows, or non-finite entries.
  explicit FunctionTable(std::vector<std::vector<double>> rows);
  std::size_t num_functions() const { return rows_; }
  std::size_t sample_size() const { return cols_; }
  double at(std::size_t h, std::size_t i) const { return values_[h * cols_ + i]; }
  std::span<const double> row(std::size_t h) const { return {values_.data() + h * cols_, cols_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct RademacherEstimate {
  double estimate = 0.0;
  double std_error = 0.0;  // sample std / sqrt(draws); NaN for a single draw
};

/// Monte-Carlo estimate of E_sigma[max_h (1/m) sum_i sigma_i f_h(z_i)] over
/// uniform sign vectors. ConfigError for num_draws == 0.
RademacherEstimate rademacher_mc(const FunctionTable& table, std::size_t num_draws,
                                 std::uint64_t seed);

using Matrix = std::vector<std::vector<double>>;

/// w_ij proportional to (D_i + D_j)^(-alpha), scaled so the entries sum to N^2.
/// ConfigError for alpha <= 1, an empty list, or a non-positive D_i.
Matrix powerlaw_weights(std::span<const double> difficulty_inverses, double alpha);

/// c1 * sum(w) / k. ConfigError for k < 1 or a non-square matrix.
double weighted_approx_error(const Matrix& weights, std::size_t k, double c1);

/// Header k,approx,est,total then one row per k.
void write_error_curve_csv(std::ostream& out, const ErrorModelParams& p);

}  // namespace smoe::theory
