// Statistics tests: frozen reference values and an independent brute-force
// rank-correlation oracle.

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "blastdose/rng.hpp"
#include "blastdose/stats.hpp"

namespace {

// Independent O(n^2) midrank computation: 1 + (#less) + (#equal - 1) / 2.
std::vector<double> brute_midranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (x[j] < x[i]) ++less;
      if (x[j] == x[i]) ++equal;
    }
    r[i] = 1.0 + double(less) + 0.5 * double(equal - 1);
  }
  return r;
}

double brute_pearson(const std::vector<double>& a,
                     const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= double(n);
  mb /= double(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

TEST(StatsMidranks, TiesShareAverageRank) {
  const auto r = blastdose::midranks({10, 20, 20, 30});
  const std::vector<double> want = {1, 2.5, 2.5, 4};
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_DOUBLE_EQ(r[i], want[i]);
  const auto all = blastdose::midranks({5, 5, 5});
  for (double v : all) EXPECT_DOUBLE_EQ(v, 2.0);
}

TEST(StatsSpearman, FrozenReferenceCase) {
  const auto r = blastdose::spearman({1, 2, 3, 4, 5}, {5, 6, 7, 8, 7});
  EXPECT_NEAR(r.rho, 0.8207826816681233, 1e-12);
  EXPECT_NEAR(r.p_value, 0.08858700531354381, 1e-8);
}

TEST(StatsSpearman, MatchesBruteForceOracle) {
  blastdose::Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 3 + rng.uniform_int(0, 57);
    std::vector<double> x(n), y(n);
    bool degenerate = true;
    while (degenerate) {
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform() < 0.3 ? std::floor(rng.uniform(0, 4)) : rng.normal();
        y[i] = rng.uniform() < 0.3 ? std::floor(rng.uniform(0, 4)) : rng.normal();
      }
      degenerate = true;
      for (std::size_t i = 1; i < n; ++i)
        if (x[i] != x[0] || y[i] != y[0]) degenerate = false;
    }
    double want;
    try {
      want = brute_pearson(brute_midranks(x), brute_midranks(y));
    } catch (...) {
      continue;
    }
    if (!std::isfinite(want)) {
      EXPECT_THROW(blastdose::spearman(x, y), std::invalid_argument);
      continue;
    }
    const auto got = blastdose::spearman(x, y);
    ASSERT_NEAR(got.rho, want, 1e-12) << "trial " << trial << " n=" << n;
  }
}

TEST(StatsSpearman, EdgeBehavior) {
  // Perfect monotone association: p collapses to zero.
  const auto perfect = blastdose::spearman({1, 2, 3, 4}, {10, 20, 30, 40});
  EXPECT_DOUBLE_EQ(perfect.rho, 1.0);
  EXPECT_DOUBLE_EQ(perfect.p_value, 0.0);
  const auto anti = blastdose::spearman({1, 2, 3, 4}, {4, 3, 2, 1});
  EXPECT_DOUBLE_EQ(anti.rho, -1.0);
  // Constant input has no rank variance.
  EXPECT_THROW(blastdose::spearman({1, 1, 1}, {1, 2, 3}),
               std::invalid_argument);
  EXPECT_THROW(blastdose::spearman({1, 2}, {1, 2}), std::invalid_argument);
}

TEST(StatsSpearman, ExactPermutationPValue) {
  // Perfect monotone with n = 5: only identity and reversal reach |rho| = 1.
  const double p = blastdose::spearman_exact_p({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10});
  EXPECT_NEAR(p, 2.0 / 120.0, 1e-12);
  EXPECT_THROW(blastdose::spearman_exact_p({1, 2, 3, 4, 5, 6, 7, 8},
                                           {1, 2, 3, 4, 5, 6, 7, 8}),
               std::invalid_argument);
}

TEST(StatsTrend, FrozenRegressionCase) {
  const auto r = blastdose::linear_trend({0, 1, 2, 3, 4, 5},
                                         {1.0, 1.1, 0.9, 1.3, 1.7, 1.6});
  EXPECT_NEAR(r.slope, 0.14857142857142855, 1e-12);
  EXPECT_NEAR(r.intercept, 0.8952380952380952, 1e-12);
  EXPECT_NEAR(r.p_value, 0.0316269380934644, 1e-8);
}

TEST(StatsTrend, ErrorsAndPerfectFit) {
  EXPECT_THROW(blastdose::linear_trend({1, 1, 1}, {1, 2, 3}),
               std::invalid_argument);
  EXPECT_THROW(blastdose::linear_trend({1, 2}, {1, 2}), std::invalid_argument);
  const auto perfect = blastdose::linear_trend({0, 1, 2, 3}, {1, 3, 5, 7});
  EXPECT_NEAR(perfect.slope, 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(perfect.p_value, 0.0);
}

TEST(StatsPercentile, LinearInterpolationOracle) {
  const std::vector<double> v = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(blastdose::percentile_linear(v, 50.0), 2.5);
  EXPECT_DOUBLE_EQ(blastdose::percentile_linear(v, 25.0), 1.75);
  EXPECT_DOUBLE_EQ(blastdose::percentile_linear(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(blastdose::percentile_linear(v, 100.0), 4.0);
  EXPECT_DOUBLE_EQ(blastdose::percentile_linear({3, 1, 2}, 87.5), 2.75);
  EXPECT_THROW(blastdose::percentile_linear({}, 50.0), std::invalid_argument);
}

TEST(StatsLogSumExp, StableAccumulation) {
  EXPECT_NEAR(blastdose::log_sum_exp(
                  {std::log(1.0), std::log(2.0), std::log(3.0)}),
              std::log(6.0), 1e-12);
  EXPECT_NEAR(blastdose::log_sum_exp({1000.0, 1000.0}), 1000.0 + std::log(2.0),
              1e-9);
  EXPECT_TRUE(std::isinf(blastdose::log_sum_exp(
      {-std::numeric_limits<double>::infinity()})));
}

}  // namespace
