// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "smoe/common/error.hpp"
#include "smoe/theory/theory.hpp"

using namespace smoe;
using namespace smoe::theory;

namespace {

ErrorModelParams reference_params(EstimationVariant v = EstimationVariant::kTheoremConsistent) {
  ErrorModelParams p;
  p.N = 4;
  p.T = 8;
  p.d_N = 20;
  p.m = 10;
  p.c1 = 1;
  p.c2 = 1;
  p.variant = v;
  return p;
}

}  // namespace

TEST_SUITE("error models") {
  TEST_CASE("approximation term") {
    auto p = reference_params();
    p.N = 8;
    CHECK(approx_error(4, p) == 16.0);
    p.N = 2;
    p.T = 4;
    CHECK(approx_error(4, p) == 1.0);
    p = reference_params();
    for (std::size_t k = 2; k <= 8; ++k) CHECK(approx_error(k, p) < approx_error(k - 1, p));
    CHECK_THROWS_AS(approx_error(0, p), ConfigError);
    CHECK_THROWS_AS(approx_error(9, p), ConfigError);
  }

  TEST_CASE("estimation term, both variants") {
    auto lit = reference_params(EstimationVariant::kPaperLiteral);
    CHECK(est_error(8, lit) == 0.0);
    std::size_t best = 1;
    for (std::size_t k = 1; k <= 8; ++k) if (est_error(k, lit) > est_error(best, lit)) best = k;
    CHECK(best == 3);
    auto tc = reference_params();
    CHECK(est_error(4, tc) == doctest::Approx(std::sqrt(4.0 * 4 * 20 * std::log(8.0) / 10)).epsilon(1e-12));
    CHECK(std::abs(est_error(4, tc) - 8.157) < 1e-3);
    for (std::size_t k = 2; k <= 8; ++k) CHECK(est_error(k, tc) > est_error(k - 1, tc));
  }

  TEST_CASE("literal estimation argmax sits at the integer nearest T/e") {
    for (std::size_t T = 3; T <= 64; ++T) {
      auto p = reference_params(EstimationVariant::kPaperLiteral);
      p.T = T;
      std::size_t best = 1;
      for (std::size_t k = 1; k <= T; ++k) if (est_error(k, p) > est_error(best, p)) best = k;
      CHECK(best == static_cast<std::size_t>(std::llround(static_cast<double>(T) / M_E)));
    }
  }

  TEST_CASE("total error reference values") {
    auto p = reference_params();
    CHECK(std::abs(total_error(3, p) - 12.397) < 1e-3);
    CHECK(std::abs(total_error(4, p) - 12.157) < 1e-3);
    CHECK(std::abs(total_error(5, p) - 12.320) < 1e-3);
    p.c1 = 0;
    p.c2 = 0;
    for (std::size_t k = 1; k <= 8; ++k) CHECK(total_error(k, p) == 0.0);
  }

  TEST_CASE("curve rows are the three terms") {
    const auto p = reference_params();
    const auto curve = error_curve(p);
    REQUIRE(curve.size() == 8);
    for (const auto& pt : curve) {
      CHECK(pt.approx == approx_error(pt.k, p));
      CHECK(pt.est == est_error(pt.k, p));
      CHECK(pt.total == doctest::Approx(pt.approx + pt.est).epsilon(1e-15));
    }
    std::ostringstream csv;
    write_error_curve_csv(csv, p);
    std::istringstream lines(csv.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == "k,approx,est,total");
    std::size_t rows = 0;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 8);
  }

  TEST_CASE("matches the direct formula on random draws") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
      const auto p = fixtures::random_params(rng);
      for (std::size_t k = 1; k <= p.T; ++k) {
        const double expect = oracle::total_error_tc(static_cast<double>(k), p.N, p.T, p.d_N,
                                                     static_cast<double>(p.m), p.c1, p.c2);
        CHECK(total_error(k, p) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_SUITE("optimal k") {
  TEST_CASE("reference grid argmin") {
    auto p = reference_params();
    const auto opt = optimal_k(p);
    CHECK(opt.k_star == 4);
    REQUIRE(opt.curve.size() == 8);
    CHECK(opt.curve[3] == total_error(4, p));
    p.m = 1000000000;
    CHECK(optimal_k(p).k_star == 8);
  }

  TEST_CASE("literal variant always picks T") {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 100; ++i) {
      auto p = fixtures::random_params(rng);
      p.variant = EstimationVariant::kPaperLiteral;
      CHECK(optimal_k(p).k_star == p.T);
    }
  }

  TEST_CASE("ties go to the smallest k") {
    auto p = reference_params();
    p.c1 = 0;
    p.c2 = 0;
    CHECK(optimal_k(p).k_star == 1);
  }

  TEST_CASE("continuous optimum scaling") {
    const auto p = reference_params();
    const double base = optimal_k_continuous(p);
    CHECK(base == doctest::Approx(std::pow(2.0, 2.0 / 3.0) * 4 * std::cbrt(10.0 / (20.0 * std::log(8.0)))));
    auto q = p;
    q.N *= 2;
    CHECK(optimal_k_continuous(q) == doctest::Approx(2 * base).epsilon(1e-12));
    q = p;
    q.m *= 8;
    CHECK(optimal_k_continuous(q) == doctest::Approx(2 * base).epsilon(1e-12));
    q = p;
    q.d_N *= 8;
    CHECK(optimal_k_continuous(q) == doctest::Approx(base / 2).epsilon(1e-12));
  }

  TEST_CASE("continuous optimum matches a fine-grid argmin") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
      const auto p = fixtures::random_params(rng);
      const double k_star = optimal_k_continuous(p);
      const double lo = k_star / 4, hi = k_star * 4;
      const std::size_t cells = 100000;
      const double step = (hi - lo) / cells;
      double best_k = lo, best = INFINITY;
      for (std::size_t c = 0; c <= cells; ++c) {
        const double k = lo + step * static_cast<double>(c);
        const double e = oracle::total_error_tc(k, p.N, p.T, p.d_N, static_cast<double>(p.m), p.c1, p.c2);
        if (e < best) {
          best = e;
          best_k = k;
        }
      }
      CHECK(std::abs(best_k - k_star) <= step);
    }
  }

  TEST_CASE("grid optimum is monotone in N, m and d_N") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 100; ++i) {
      const auto p = fixtures::random_params(rng);
      auto bigger = p;
      bigger.N += 1 + i % 5;
      CHECK(optimal_k(bigger).k_star >= optimal_k(p).k_star);
      bigger = p;
      bigger.m *= 2 + i % 7;
      CHECK(optimal_k(bigger).k_star >= optimal_k(p).k_star);
      bigger = p;
      bigger.d_N *= 1.5 + i % 4;
      CHECK(optimal_k(bigger).k_star <= optimal_k(p).k_star);
    }
  }

  TEST_CASE("errors") {
    auto p = reference_params(EstimationVariant::kPaperLiteral);
    CHECK_THROWS_AS(optimal_k_continuous(p), UnsupportedVariant);
    p = reference_params();
    p.T = 1;
    CHECK_THROWS_AS(optimal_k_continuous(p), ConfigError);
    p = reference_params();
    p.c2 = 0;
    CHECK_THROWS_AS(optimal_k_continuous(p), ConfigError);
  }
}

TEST_SUITE("bounds") {
  TEST_CASE("generalization bound against hand arithmetic") {
    CHECK(theorem1_bound(1, 0.1, 2, 4, 3, 8, 1000, 0.05) == doctest::Approx(1.0240399073284513).epsilon(1e-9));
    CHECK(theorem1_bound(0, 0, 1, 1, 0, 2, 50, 0.05) == doctest::Approx(0.38412911652796830).epsilon(1e-9));
    CHECK(theorem1_bound(2, 0.05, 4, 10, 20, 16, 1e6, 0.01) == doctest::Approx(0.52118722556981855).epsilon(1e-9));
    for (double m : {1.0, 17.0, 1e4}) {
      CHECK(theorem1_bound(0, 0, 1, 1, 0, 8, m, 0.05) == doctest::Approx(2 * std::sqrt(std::log(40.0) / (2 * m))));
    }
    CHECK(theorem1_bound(1, 0.1, 2, 4, 3, 8, 1e300, 0.05) == doctest::Approx(0.4).epsilon(1e-9));
  }

  TEST_CASE("generalization bound monotonicity") {
    const double base = theorem1_bound(1, 0.1, 2, 4, 3, 8, 1000, 0.05);
    CHECK(theorem1_bound(1, 0.1, 3, 4, 3, 8, 1000, 0.05) > base);
    CHECK(theorem1_bound(1, 0.1, 2, 5, 3, 8, 1000, 0.05) > base);
    CHECK(theorem1_bound(1, 0.1, 2, 4, 4, 8, 1000, 0.05) > base);
    CHECK(theorem1_bound(1, 0.1, 2, 4, 3, 8, 2000, 0.05) < base);
    CHECK(theorem1_bound(1, 0.1, 2, 4, 3, 8, 1000, 0.2) < base);
  }

  TEST_CASE("generalization bound errors") {
    CHECK_THROWS_AS(theorem1_bound(1, 0.1, 9, 4, 3, 8, 1000, 0.05), ConfigError);
    CHECK_THROWS_AS(theorem1_bound(1, 0.1, 0, 4, 3, 8, 1000, 0.05), ConfigError);
    CHECK_THROWS_AS(theorem1_bound(1, 0.1, 2, 4, 3, 8, 0, 0.05), ConfigError);
    CHECK_THROWS_AS(theorem1_bound(1, 0.1, 2, 4, 3, 8, 1000, 1.0), ConfigError);
    CHECK_THROWS_AS(theorem1_bound(-1, 0.1, 2, 4, 3, 8, 1000, 0.5), ConfigError);
  }

  TEST_CASE("routing pattern bound") {
    CHECK(routing_pattern_bound(8, 2, 1, 1, 100) == doctest::Approx(11.962726386898445).epsilon(1e-12));
    CHECK(routing_pattern_bound(8, 8, 3, 2, 50) == doctest::Approx(6 * std::log(100.0)).epsilon(1e-12));
    CHECK(routing_pattern_bound(64, 8, 3, 2.5, 1e5) == doctest::Approx(424.70753645247350).epsilon(1e-12));
    double prev = routing_pattern_bound(8, 3, 2, 1.5, 1);
    for (double m : {2.0, 10.0, 1e3, 1e9}) {
      const double cur = routing_pattern_bound(8, 3, 2, 1.5, m);
      CHECK(cur > prev);
      prev = cur;
    }
    CHECK(std::isfinite(routing_pattern_bound(4096, 2048, 1000, 500, 1e12)));
    CHECK_THROWS_AS(routing_pattern_bound(8, 9, 1, 1, 10), ConfigError);
  }
}

TEST_SUITE("rademacher") {
  TEST_CASE("zero class is exactly zero") {
    FunctionTable zero({{0, 0, 0, 0}});
    const auto r = rademacher_mc(zero, 1000, 1);
    CHECK(r.estimate == 0.0);
    CHECK(r.std_error == 0.0);
  }

  TEST_CASE("singleton constant class averages to zero") {
    FunctionTable one({std::vector<double>(50, 1.0)});
    const auto r = rademacher_mc(one, 20000, 2);
    CHECK(std::abs(r.estimate) <= 3 * r.std_error);
  }

  TEST_CASE("plus/minus constants at m = 100") {
    FunctionTable pm({std::vector<double>(100, 1.0), std::vector<double>(100, -1.0)});
    const auto r = rademacher_mc(pm, 100000, 3);
    const double target = std::sqrt(2.0 / (M_PI * 100.0));
    CHECK(std::abs(r.estimate - target) < 0.1 * target);
  }

  TEST_CASE("plus/minus constants against enumeration at m = 10") {
    const std::vector<std::vector<double>> rows{std::vector<double>(10, 1.0), std::vector<double>(10, -1.0)};
    const auto r = rademacher_mc(FunctionTable(rows), 50000, 4);
    CHECK(std::abs(r.estimate - oracle::rademacher_exhaustive(rows)) <= 3 * r.std_error);
  }

  TEST_CASE("random tables agree with exhaustive enumeration") {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> d(0.0, 1.0);
    for (std::size_t m = 1; m <= 12; ++m) {
      for (std::size_t h : {1, 3, 8}) {
        std::vector<std::vector<double>> rows(h, std::vector<double>(m));
        for (auto& r : rows) for (auto& v : r) v = d(rng);
        const auto est = rademacher_mc(FunctionTable(rows), 20000, 100 * m + h);
        CHECK(std::abs(est.estimate - oracle::rademacher_exhaustive(rows)) <= 3 * est.std_error);
      }
    }
  }

  TEST_CASE("single draw has no standard error; seeds reproduce") {
    FunctionTable t({{1, -2, 3}});
    CHECK(std::isnan(rademacher_mc(t, 1, 0).std_error));
    CHECK(rademacher_mc(t, 100, 5).estimate == rademacher_mc(t, 100, 5).estimate);
  }

  TEST_CASE("table errors") {
    CHECK_THROWS_AS(FunctionTable({}), ConfigError);
    CHECK_THROWS_AS(FunctionTable(std::vector<std::vector<double>>{{}}), ConfigError);
    CHECK_THROWS_AS(FunctionTable({{1, 2}, {1}}), ConfigError);
    CHECK_THROWS_AS(FunctionTable({{1, NAN}}), ConfigError);
    CHECK_THROWS_AS(rademacher_mc(FunctionTable(std::vector<std::vector<double>>{{1.0}}), 0, 0), ConfigError);
  }
}

TEST_SUITE("power law") {
  TEST_CASE("uniform difficulties give unit weights") {
    const std::vector<double> d(5, 2.0);
    const auto w = powerlaw_weights(d, 1.5);
    for (const auto& row : w) for (double v : row) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    auto p = reference_params();
    p.N = 5;
    for (std::size_t k = 1; k <= 8; ++k) CHECK(weighted_approx_error(w, k, 1.0) == doctest::Approx(approx_error(k, p)).epsilon(1e-12));
  }

  TEST_CASE("two-task hand example") {
    const std::vector<double> d{1, 3};
    const auto w = powerlaw_weights(d, 2.0);
    const double raw[2][2] = {{1.0 / 4, 1.0 / 16}, {1.0 / 16, 1.0 / 36}};
    const double s = raw[0][0] + raw[0][1] + raw[1][0] + raw[1][1];
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(w[i][j] == doctest::Approx(4 * raw[i][j] / s).epsilon(1e-12));
    CHECK(weighted_approx_error(w, 2, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(weighted_approx_error(w, 4, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("symmetric, positive, normalized and equivariant") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.1, 10.0), a(1.01, 4.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> d(2 + trial % 9);
      for (auto& v : d) v = u(rng);
      const double alpha = a(rng);
      const auto w = powerlaw_weights(d, alpha);
      const double n = static_cast<double>(d.size());
      double sum = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t j = 0; j < d.size(); ++j) {
          CHECK(w[i][j] > 0.0);
          CHECK(w[i][j] == w[j][i]);
          sum += w[i][j];
        }
      }
      CHECK(std::abs(sum - n * n) < 1e-9);
      auto swapped = d;
      std::swap(swapped[0], swapped[1]);
      const auto ws = powerlaw_weights(swapped, alpha);
      CHECK(ws[0][0] == doctest::Approx(w[1][1]).epsilon(1e-12));
      CHECK(ws[0][1] == doctest::Approx(w[1][0]).epsilon(1e-12));
      for (std::size_t k = 1; k <= 4; ++k) {
        CHECK(weighted_approx_error(w, 2 * k, 1.0) == doctest::Approx(weighted_approx_error(w, k, 1.0) / 2).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("errors") {
    const std::vector<double> d{1, 2};
    CHECK_THROWS_AS(powerlaw_weights(d, 1.0), ConfigError);
    CHECK_THROWS_AS(powerlaw_weights(std::vector<double>{1, 0}, 2.0), ConfigError);
    CHECK_THROWS_AS(powerlaw_weights(std::vector<double>{}, 2.0), ConfigError);
    CHECK_THROWS_AS(weighted_approx_error(powerlaw_weights(d, 2.0), 0, 1.0), ConfigError);
    CHECK_THROWS_AS(weighted_approx_error(Matrix{{1, 2}}, 1, 1.0), ConfigError);
  }
}

TEST_SUITE("params") {
  TEST_CASE("json round trip, hashing and validation") {
    auto p = reference_params(EstimationVariant::kPaperLiteral);
    nlohmann::json j = p;
    CHECK(j.at("variant") == "PAPER_LITERAL");
    CHECK(j.get<ErrorModelParams>() == p);
    CHECK(params_hash(p) == params_hash(j.get<ErrorModelParams>()));
    auto q = p;
    q.m = 11;
    CHECK(params_hash(q) != params_hash(p));
    CHECK_THROWS_AS(nlohmann::json({{"NN", 3}}).get<ErrorModelParams>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"variant", "OTHER"}}).get<ErrorModelParams>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"delta", 1.5}}).get<ErrorModelParams>().validate(), ConfigError);
    CHECK(variant_from_name(variant_name(EstimationVariant::kTheoremConsistent)) == EstimationVariant::kTheoremConsistent);
  }
}
