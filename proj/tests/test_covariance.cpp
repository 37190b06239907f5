#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <omp.h>

#include "nusar/covariance.hpp"
#include "nusar/error.hpp"
#include "nusar/linalg.hpp"
#include "nusar/tail_bound.hpp"
#include "oracles.hpp"

using namespace nusar;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

const std::vector<double> kGrid{-0.45, -0.25, -0.1, 0.1, 0.25, 0.45};

// Frozen from the first sweep (max 0.2386 at q = 0.999); not a proven constant.
constexpr double kDiffBoundCeiling = 0.25;
// Frozen from the first pmf sweep (maxima 0.3043 and 0.1954).
constexpr double kPmfDiffCeiling = 0.31;
constexpr double kPmfMassCeiling = 0.20;

}  // namespace

TEST_SUITE("covariance") {
  TEST_CASE("sigma_sq and rho examples") {
    CHECK(sigma_sq({0, 0}) == 1.0);
    CHECK(sigma_sq({0.25, 0.25}) == doctest::Approx(1.1547005).epsilon(1e-7));
    CHECK(sigma_sq({0.25, 0.25}) == doctest::Approx(1.0 / std::sqrt(0.75)).epsilon(1e-15));
    CHECK(sigma_sq({0.5, 0.3}) == doctest::Approx(1.0 / std::sqrt(0.3456)).epsilon(1e-15));
    CHECK(code_of([] { sigma_sq({0.5, 0.5}); }) == ErrorCode::NonStationary);
    CHECK(code_of([] { sigma_sq({0.7, -0.4}); }) == ErrorCode::NonStationary);

    CHECK(rho_corr({0.5, 0}) == 0.0);
    CHECK(rho_corr({0, 0}) == 0.0);
    CHECK(rho_corr({0.25, 0.25}) == doctest::Approx(0.0717968).epsilon(1e-6));
  }

  TEST_CASE("sigma_sq is at least one on random stationary points") {
    oracle::Gen gen(1);
    for (int n = 0; n < 500; ++n) CHECK(sigma_sq(gen.params(0.999)) >= 1.0);
  }

  TEST_CASE("cov_closed examples") {
    const ModelParams p{0.25, 0.25};
    CHECK(cov_closed(p, 0, 0) == doctest::Approx(1.1547005).epsilon(1e-7));
    CHECK(cov_closed(p, 1, -1) == doctest::Approx(0.0829038).epsilon(1e-6));
    CHECK(cov_closed(p, 1, 1) == doctest::Approx(sigma_sq(p) - 1.0).epsilon(1e-14));
    CHECK(cov_closed(p, 1, 1) == doctest::Approx(0.1547005).epsilon(1e-6));
    // Yule-Walker form of the same value.
    CHECK(cov_closed(p, 1, 1) == doctest::Approx(0.25 * cov_closed(p, 0, 1) + 0.25 * cov_closed(p, 1, 0)).epsilon(1e-14));
  }

  TEST_CASE("axis models use the one-dimensional formula") {
    CHECK(cov_closed({0.5, 0}, 3, 0) == doctest::Approx(0.125 / 0.75).epsilon(1e-15));
    CHECK(cov_closed({0.5, 0}, 3, 1) == 0.0);
    CHECK(cov_closed({0, -0.6}, 0, -2) == doctest::Approx(0.36 / 0.64).epsilon(1e-15));
    CHECK(cov_closed({0, 0}, 0, 0) == 1.0);
    CHECK(cov_closed({0, 0}, 1, 0) == 0.0);
    const oracle::CovTable ta(0.5, 0, 200, 4), tb(0, -0.3, 200, 4);
    for (int k = -4; k <= 4; ++k)
      for (int l = -4; l <= 4; ++l) {
        CHECK(cov_closed({0.5, 0}, k, l) == doctest::Approx(ta(k, l)).epsilon(1e-12));
        CHECK(cov_closed({0, -0.3}, k, l) == doctest::Approx(tb(k, l)).epsilon(1e-12));
      }
  }

  TEST_CASE("cov_closed matches the lgamma weight oracle") {
    oracle::Gen gen(2);
    for (int n = 0; n < 40; ++n) {
      const ModelParams p = gen.params(0.8);
      const oracle::CovTable table(p.alpha, p.beta, 160, 5);
      for (int k = -5; k <= 5; ++k)
        for (int l = -5; l <= 5; ++l) CHECK(std::abs(cov_closed(p, k, l) - table(k, l)) < 1e-10);
    }
  }

  TEST_CASE("the printed equal-coefficient formula only holds for alpha == beta") {
    for (double a : {0.1, 0.3, -0.2, 0.45})
      for (int k = 0; k <= 6; ++k)
        for (int l = 0; l <= 6; ++l) {
          CHECK(cov_equal_coeff_sum({a, a}, k, l) == doctest::Approx(cov_closed({a, a}, k, l)).epsilon(1e-12));
          CHECK(cov_equal_coeff_sum({a, a}, -k, -l) == doctest::Approx(cov_closed({a, a}, k, l)).epsilon(1e-12));
        }
    CHECK(code_of([] { cov_equal_coeff_sum({0.3, 0.4}, 1, 1); }) == ErrorCode::OutOfRange);
    CHECK(code_of([] { cov_equal_coeff_sum({0.3, 0.3}, 1, -1); }) == ErrorCode::WrongQuadrant);

    // With alpha != beta the shortcut gives sigma^2 - 1 at (1,1), which is not R(1,1).
    const ModelParams p{0.3, 0.4};
    CHECK(sigma_sq(p) - 1.0 == doctest::Approx(0.40733).epsilon(1e-4));
    CHECK(cov_closed(p, 1, 1) == doctest::Approx(0.39557).epsilon(1e-4));
    CHECK(cov_closed(p, 1, 1) == doctest::Approx(oracle::cov(0.3, 0.4, 1, 1, 200)).epsilon(1e-12));
  }

  TEST_CASE("f4_series examples") {
    CHECK(f4_series(1, 1, 1, 1, 0.0, 0.0, 1e-14) == 1.0);
    CHECK(f4_series(3, 2, 5, 4, 0.0, 0.0, 1e-14) == 1.0);
    // x = y = -0.3125 is outside sqrt|x| + sqrt|y| < 1.
    CHECK(code_of([] { f4_series(1, 1, 1, 1, -0.3125, -0.3125, 1e-14); }) == ErrorCode::Divergent);
    CHECK(code_of([] { f4_series(1, 1, 1, 1, 0.36, 0.16, 1e-14); }) == ErrorCode::Divergent);
    CHECK(code_of([] { f4_series(0, 1, 1, 1, 0.1, 0.1, 1e-14); }) == ErrorCode::OutOfRange);
  }

  TEST_CASE("f4 reduction identity inside the convergence region") {
    for (int a = 1; a <= 3; ++a)
      for (int b = 1; b <= 3; ++b)
        for (const auto [x, y] : {std::pair{0.1, 0.15}, std::pair{0.05, 0.2}, std::pair{0.12, 0.12}}) {
          const double den = (1 - x) * (1 - y);
          const double want = std::pow(1 - x, b) * std::pow(1 - y, a) / (1 - x * y);
          CHECK(f4_series(a, b, a, b, -x / den, -y / den, 1e-15) == doctest::Approx(want).epsilon(1e-13));
        }
  }

  TEST_CASE("cov_f4 examples") {
    const ModelParams p{0.25, 0.25};
    CHECK(cov_f4(p, 0, 0) == doctest::Approx(sigma_sq(p)).epsilon(1e-13));
    CHECK(cov_f4(p, 1, -1) == doctest::Approx(cov_closed(p, 1, -1)).epsilon(1e-13));
    CHECK(std::abs(cov_f4({0.3, -0.4}, 2, 0) - cov_closed({0.3, -0.4}, 2, 0)) < 1e-10);
    CHECK(code_of([] { cov_f4({0.3, 0}, 1, 0); }) == ErrorCode::OutOfRange);
  }

  TEST_CASE("pmf_s examples and normalization") {
    CHECK(pmf_s(1, 1, 0.5, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(pmf_s(2, 2, 0.5, 2) == doctest::Approx(0.375).epsilon(1e-15));
    CHECK(pmf_s(0, 0, 0.3, 0) == 1.0);
    CHECK(pmf_s(3, 4, 0.3, -1) == 0.0);
    CHECK(pmf_s(3, 4, 0.3, 8) == 0.0);
    CHECK(code_of([] { pmf_s(1, 1, 1.0, 0); }) == ErrorCode::OutOfRange);
    oracle::Gen gen(3);
    for (int t = 0; t < 20; ++t) {
      const int n = gen.integer(0, 300);
      const int m = gen.integer(0, 300);
      const double nu = gen.uniform(0.01, 0.99);
      const auto table = pmf_s_table(n, m, nu);
      double total = 0.0, mean = 0.0;
      for (std::size_t j = 0; j < table.size(); ++j) {
        total += table[j];
        mean += static_cast<double>(j) * table[j];
        if (j % 37 == 0) CHECK(table[j] == doctest::Approx(pmf_s(n, m, nu, static_cast<int>(j))).epsilon(1e-10));
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(mean == doctest::Approx(n * nu + m * (1 - nu)).epsilon(1e-10));
    }
  }

  TEST_CASE("cov_binrep examples") {
    const ModelParams p{0.25, 0.25};
    CHECK(cov_binrep(p, 0, 0) == doctest::Approx(1.1547005).epsilon(1e-7));
    CHECK(cov_binrep(p, 0, 0) == doctest::Approx(sigma_sq(p)).epsilon(1e-13));
    CHECK(cov_binrep(p, 1, 1) == doctest::Approx(0.1547005).epsilon(1e-6));
    CHECK(code_of([] { cov_binrep({0.25, 0.25}, 1, -1); }) == ErrorCode::WrongQuadrant);
  }

  TEST_CASE("series oracle examples") {
    const ModelParams p{0.25, 0.25};
    CHECK(std::abs(cov_series_oracle(p, 0, 0, 60) - 1.0 / std::sqrt(0.75)) < 1e-12);
    CHECK(std::abs(cov_series_oracle(p, 1, -1, 60) - cov_closed(p, 1, -1)) < 1e-12);
    // 0.5^3 / 0.75; the listed 0.0166667 drops a digit.
    CHECK(std::abs(cov_series_oracle({0.5, 0}, 3, 0, 60) - 0.1666667) < 1e-7);
    CHECK(code_of([] { cov_series_oracle({0.6, 0.4}, 0, 0, 10); }) == ErrorCode::NonStationary);
  }

  TEST_CASE("tail_variance_bound") {
    CHECK(tail_variance_bound(0.5, 4) == doctest::Approx(0.0013021).epsilon(1e-4));
    CHECK(tail_variance_bound(0.5, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    for (double q : {0.1, 0.5, 0.9, 0.99}) {
      for (int m = 0; m < 50; ++m) CHECK(tail_variance_bound(q, m + 1) < tail_variance_bound(q, m));
      const int m = margin_for_tolerance(q, 1e-12);
      CHECK(tail_variance_bound(q, m) <= 1e-12);
      if (m > 0) CHECK(tail_variance_bound(q, m - 1) > 1e-12);
    }
    // The bound really dominates the omitted variance.
    for (const ModelParams p : {ModelParams{0.5, 0.3}, ModelParams{-0.2, 0.7}})
      for (int margin : {2, 5, 10}) {
        const double truth = cov_closed(p, 0, 0);
        CHECK(truth - cov_series_oracle(p, 0, 0, margin) <= tail_variance_bound(p.radius(), margin));
      }
  }

  TEST_CASE("log_factorial") {
    for (long n : {0L, 1L, 10L, 255L}) CHECK(log_factorial(n) == doctest::Approx(std::lgamma(n + 1.0)).epsilon(1e-15));
    for (long n : {256L, 300L, 1000L, 100000L}) CHECK(log_factorial(n) == doctest::Approx(std::lgamma(n + 1.0)).epsilon(1e-14));
    CHECK(std::exp(log_binomial(10, 3)) == doctest::Approx(120.0).epsilon(1e-13));
  }

  TEST_CASE("four-way agreement on the grid") {
    for (double a : kGrid)
      for (double b : kGrid) {
        const ModelParams p{a, b};
        const int margin = margin_for_tolerance(p.radius(), 1e-12);
        for (int k = -6; k <= 6; ++k)
          for (int l = -6; l <= 6; ++l) {
            const double c = cov_closed(p, k, l);
            CHECK(std::abs(cov_f4(p, k, l) - c) < 1e-8);
            CHECK(std::abs(cov_series_oracle(p, k, l, margin) - c) < 1e-8);
            if (k * l >= 0) CHECK(std::abs(cov_binrep(p, k, l) - c) < 1e-8);
          }
      }
  }

  TEST_CASE("four-way agreement on random points") {
    oracle::Gen gen(4);
    for (int t = 0; t < 30; ++t) {
      const ModelParams p = gen.params(0.9);
      const int margin = margin_for_tolerance(p.radius(), 1e-12);
      for (int n = 0; n < 10; ++n) {
        const int k = gen.integer(-6, 6);
        const int l = gen.integer(-6, 6);
        const double c = cov_closed(p, k, l);
        CHECK(std::abs(cov_f4(p, k, l) - c) < 1e-8);
        CHECK(std::abs(cov_series_oracle(p, k, l, margin) - c) < 1e-8);
        if (k * l >= 0) CHECK(std::abs(cov_binrep(p, k, l) - c) < 1e-8);
      }
    }
  }

  TEST_CASE("symmetry for every method") {
    oracle::Gen gen(5);
    for (int t = 0; t < 20; ++t) {
      const ModelParams p = gen.params(0.85);
      for (CovMethod m : {CovMethod::ClosedForm, CovMethod::AppellF4, CovMethod::BinomialRep, CovMethod::SeriesOracle}) {
        const CovKernel kernel(p, m, 1e-13);
        const int k = gen.integer(-7, 7), l = gen.integer(-7, 7);
        CHECK(kernel(k, l) == kernel(-k, -l));
        CHECK(kernel.evaluate(k, l) == kernel.evaluate(-k, -l));
      }
      const int k = gen.integer(-7, 7), l = gen.integer(-7, 7);
      CHECK(cov_closed(p, k, l) == doctest::Approx(cov_closed(p, -k, -l)).epsilon(1e-13));
      CHECK(cov_f4(p, k, l) == doctest::Approx(cov_f4(p, -k, -l)).epsilon(1e-13));
    }
  }

  TEST_CASE("Yule-Walker and origin identities") {
    for (double a : kGrid)
      for (double b : kGrid) {
        const ModelParams p{a, b};
        for (int k = -20; k <= 20; ++k)
          for (int l = -20; l <= 20; ++l)
            if (k >= 1 || l >= 1)
              CHECK(std::abs(cov_closed(p, k, l) - a * cov_closed(p, k - 1, l) - b * cov_closed(p, k, l - 1)) < 1e-10);
        CHECK(std::abs(cov_closed(p, 0, 0) - a * cov_closed(p, -1, 0) - b * cov_closed(p, 0, -1) - 1.0) < 1e-10);
      }
  }

  TEST_CASE("domination by the absolute-coefficient field") {
    for (double a : kGrid)
      for (double b : kGrid)
        for (int k = -8; k <= 8; ++k)
          for (int l = -8; l <= 8; ++l)
            CHECK(std::abs(cov_closed({a, b}, k, l)) <= cov_closed({std::abs(a), std::abs(b)}, k, l) * (1 + 1e-12) + 1e-15);
  }

  TEST_CASE("scaled anti-diagonal difference stays below its frozen ceiling") {
    double worst_99 = 0.0, worst_999 = 0.0;
    for (double q : {0.9, 0.99, 0.999}) {
      double worst = 0.0;
      for (double nu : {0.1, 0.25, 0.5, 0.75, 0.9})
        for (double sign : {1.0, -1.0}) {
          const ModelParams p{sign * nu * q, sign * (1 - nu) * q};
          const double scale = std::pow(p.alpha * p.beta, 1.5);
          for (int k = -40; k <= 40; ++k)
            for (int l = -40; l <= 40; ++l)
              worst = std::max(worst, scale * std::abs(cov_closed(p, k - 1, l + 1) - cov_closed(p, k, l)));
        }
      CHECK(worst < kDiffBoundCeiling);
      if (q == 0.99) worst_99 = worst;
      if (q == 0.999) worst_999 = worst;
    }
    // Saturation as q -> 1.
    CHECK(worst_999 <= 1.25 * worst_99);
  }

  TEST_CASE("pmf regression ceilings") {
    const std::vector<int> sizes{2, 3, 5, 10, 20, 50, 100, 200};
    double worst_diff = 0.0, worst_mass = 0.0;
    for (double q : {0.9, 0.99})
      for (double nu : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        const double ab = nu * q * (1 - nu) * q;
        for (int k : sizes)
          for (int l : sizes) {
            const auto t = pmf_s_table(k, l, nu);
            for (std::size_t i = 0; i < t.size(); ++i) {
              worst_mass = std::max(worst_mass, ab * std::sqrt(k + l) * t[i]);
              if (i + 1 < t.size()) worst_diff = std::max(worst_diff, ab * (k + l) * std::abs(t[i + 1] - t[i]));
            }
          }
      }
    CHECK(worst_diff < kPmfDiffCeiling);
    CHECK(worst_mass < kPmfMassCeiling);
    CHECK(worst_diff == doctest::Approx(0.3043).epsilon(1e-3));
    CHECK(worst_mass == doctest::Approx(0.1954).epsilon(1e-3));
  }

  TEST_CASE("hull covariance matrices are positive definite") {
    oracle::Gen gen(6);
    for (int t = 0; t < 25; ++t) {
      const ModelParams p = gen.params(0.97);
      const int s = gen.integer(1, 12);
      const auto pts = hull_indices(TriangleWindow::balanced(s));
      DenseMatrix m(pts.size());
      const CovKernel kernel(p);
      for (std::size_t r = 0; r < pts.size(); ++r)
        for (std::size_t c = 0; c < pts.size(); ++c) m(r, c) = kernel(pts[r].i - pts[c].i, pts[r].j - pts[c].j);
      CHECK_NOTHROW(chol_spd(m, JitterPolicy::None));
    }
  }

  TEST_CASE("kernel cache is bit-identical to fresh evaluation") {
    for (CovMethod m : {CovMethod::ClosedForm, CovMethod::AppellF4, CovMethod::BinomialRep, CovMethod::SeriesOracle}) {
      const CovKernel kernel({0.3, -0.45}, m, 1e-13);
      for (int k = -5; k <= 5; ++k)
        for (int l = -5; l <= 5; ++l) {
          const double first = kernel(k, l);
          CHECK(first == kernel.evaluate(k, l));
          CHECK(first == kernel(k, l));
        }
      CHECK(kernel.cache_size() == 61);  // 121 lags folded by symmetry
      const CovKernel copy(kernel);
      CHECK(copy.cache_size() == kernel.cache_size());
      CHECK(copy(2, -3) == kernel(2, -3));
    }
    CHECK(cov_method_from_string("binrep") == CovMethod::BinomialRep);
    CHECK_THROWS_AS(cov_method_from_string("magic"), Error);
  }

  TEST_CASE("binomial and F4 kernels fall back on the axes") {
    for (CovMethod m : {CovMethod::AppellF4, CovMethod::BinomialRep}) {
      const CovKernel kernel({0.6, 0.0}, m);
      CHECK(kernel(2, 0) == doctest::Approx(0.36 / 0.64).epsilon(1e-14));
      CHECK(kernel(2, 1) == 0.0);
    }
    const CovKernel binrep({0.2, 0.3}, CovMethod::BinomialRep);
    CHECK(binrep(2, -3) == doctest::Approx(cov_closed({0.2, 0.3}, 2, -3)).epsilon(1e-12));
  }

  TEST_CASE("concurrent kernel reads agree") {
    const CovKernel shared({0.45, 0.45});
    constexpr int kLags = 400;
    std::vector<double> got(kLags * 4);
#pragma omp parallel for num_threads(4) schedule(dynamic, 7)
    for (int n = 0; n < kLags * 4; ++n) got[static_cast<std::size_t>(n)] = shared(n % kLags - kLags / 2, (n * 7) % 41 - 20);
    for (int n = 0; n < kLags * 4; ++n)
      CHECK(got[static_cast<std::size_t>(n)] == cov_closed({0.45, 0.45}, n % kLags - kLags / 2, (n * 7) % 41 - 20));
  }

  TEST_CASE("near-boundary evaluation stays accurate") {
    // Large lags and q close to one stress the log-space sums.
    const ModelParams p{0.4995, 0.4995};
    for (int k : {0, 5, 50})
      for (int l : {0, 7, 60}) {
        if (k == 0 && l == 0) continue;
        CHECK(cov_closed(p, k, l) == doctest::Approx(cov_closed(p, k - 1, l) * p.alpha + cov_closed(p, k, l - 1) * p.beta)
                                         .epsilon(1e-10));
      }
    CHECK(std::isfinite(cov_closed({0.7, 0.2999}, 300, 250)));
  }
}
