// Change-score tests: running-mean window convention, tracker hand-checks,
// step response, equivariance, and long-run stability.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "blastdose/changescore.hpp"
#include "blastdose/rng.hpp"

namespace {

using blastdose::ChangeTracker;
using blastdose::FeatureStream;

TEST(RunningMean, WindowConvention) {
  // 1..40 with window 30: the last output averages the 31 values 10..40.
  std::vector<double> v(40);
  for (int i = 0; i < 40; ++i) v[std::size_t(i)] = double(i + 1);
  const auto out = blastdose::running_mean(v, 30);
  ASSERT_EQ(out.size(), 40u);
  EXPECT_DOUBLE_EQ(out[39], 25.0);
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], 1.5);

  const auto constant = blastdose::running_mean(std::vector<double>(17, 3.25), 20);
  for (double x : constant) EXPECT_DOUBLE_EQ(x, 3.25);

  EXPECT_TRUE(blastdose::running_mean({}, 30).empty());
}

TEST(Tracker, FirstUpdateIsZeroForAnyValue) {
  for (double v : {-7.5, 0.0, 1e6, 3.14}) {
    ChangeTracker t;
    const auto u = t.update(v);
    EXPECT_DOUBLE_EQ(u.z, 0.0) << v;
    EXPECT_DOUBLE_EQ(u.z_smoothed, 0.0) << v;
  }
}

TEST(Tracker, ConstantStreamStaysZero) {
  ChangeTracker t;
  for (int i = 0; i < 500; ++i) {
    const auto u = t.update(42.0);
    EXPECT_NEAR(u.z, 0.0, 1e-9);
    EXPECT_NEAR(u.z_smoothed, 0.0, 1e-9);
    EXPECT_GE(t.m2, t.m1 * t.m1 - 1e-9);
  }
}

TEST(Tracker, RejectsNonFinite) {
  ChangeTracker t;
  t.update(1.0);
  EXPECT_THROW(t.update(std::numeric_limits<double>::quiet_NaN()),
               std::invalid_argument);
  EXPECT_THROW(t.update(std::numeric_limits<double>::infinity()),
               std::invalid_argument);
}

TEST(Tracker, StepOfThreeSigmaScoresNearThree) {
  ChangeTracker t;
  blastdose::Rng rng(17);
  for (int i = 0; i < 5000; ++i) t.update(rng.normal());
  // At the step itself the moments still describe the stationary era, so a
  // +3-sigma jump must read within 10% of 3. Later samples read lower by
  // design as the tracker adapts, so only the first one is pinned.
  const double z0 = t.update(3.0).z;
  EXPECT_GT(z0, 2.7);
  EXPECT_LT(z0, 3.3);
  // While the step persists the smoothed score climbs monotonically.
  double prev_zs = t.zs;
  bool rising = true;
  for (int i = 0; i < 50; ++i) {
    const auto u = t.update(3.0 + 0.1 * rng.normal());
    if (u.z_smoothed <= prev_zs) rising = false;
    prev_zs = u.z_smoothed;
  }
  EXPECT_TRUE(rising);
}

TEST(Tracker, ShiftScaleEquivariance) {
  // With variance huge relative to the 1/n floor, z is invariant under
  // f -> a f + b to well below 1e-6 once the stream is long. The smoothed
  // score remembers the early samples, where the floor genuinely breaks
  // scale invariance, so it is compared only after that memory has decayed
  // (0.999^23000 ~ 1e-10 of any early discrepancy remains).
  blastdose::Rng rng(19);
  std::vector<double> base(25000);
  for (double& v : base) v = 100.0 * rng.normal();
  ChangeTracker ta, tb;
  double max_dz = 0.0;
  double za_last = 0.0, zb_last = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const auto ua = ta.update(base[i]);
    const auto ub = tb.update(3.7 * base[i] + 55.0);
    if (i >= 2000) max_dz = std::max(max_dz, std::abs(ua.z - ub.z));
    za_last = ua.z_smoothed;
    zb_last = ub.z_smoothed;
  }
  EXPECT_LT(max_dz, 1e-6);
  EXPECT_NEAR(za_last, zb_last, 1e-6);
}

TEST(ScoreStream, StationaryStaysSmallAndDriftGoesPositive) {
  blastdose::Rng rng(23);
  FeatureStream stationary;
  for (int i = 0; i < 10000; ++i) {
    stationary.timestamps.push_back(double(i));
    stationary.values.push_back(rng.normal());
  }
  const auto s = blastdose::score_stream(stationary, 30);
  EXPECT_LT(std::abs(s.z_smoothed.back()), 0.5);

  FeatureStream drift;
  for (int i = 0; i < 10000; ++i) {
    drift.timestamps.push_back(double(i));
    drift.values.push_back(rng.normal() + 5.0 * double(i) / 10000.0);
  }
  const auto d = blastdose::score_stream(drift, 30);
  EXPECT_GT(d.z_smoothed.back(), 0.0);
}

TEST(ScoreStream, SeriesShapeAndConvexityBound) {
  blastdose::Rng rng(29);
  FeatureStream f;
  for (int i = 0; i < 400; ++i) {
    f.timestamps.push_back(double(i) * 5.0);
    f.values.push_back(2.0 + 0.3 * rng.normal());
  }
  const auto s = blastdose::score_stream(f, 20);
  ASSERT_EQ(s.timestamps.size(), f.timestamps.size());
  ASSERT_EQ(s.raw_feature.size(), f.values.size());
  ASSERT_EQ(s.running_mean.size(), f.values.size());
  ASSERT_EQ(s.z_instant.size(), f.values.size());
  ASSERT_EQ(s.z_smoothed.size(), f.values.size());
  const auto mean_only = blastdose::running_mean(f.values, 20);
  for (std::size_t i = 0; i < mean_only.size(); ++i)
    EXPECT_DOUBLE_EQ(s.running_mean[i], mean_only[i]);

  // The smoothed score is a convex combination of 0 and past instant scores.
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < s.z_instant.size(); ++i) {
    lo = std::min(lo, s.z_instant[i]);
    hi = std::max(hi, s.z_instant[i]);
    EXPECT_GE(s.z_smoothed[i], lo - 1e-12);
    EXPECT_LE(s.z_smoothed[i], hi + 1e-12);
  }
}

TEST(ScoreStream, RejectsUnsortedAndHandlesEmpty) {
  FeatureStream bad;
  bad.timestamps = {0.0, 2.0, 1.0};
  bad.values = {1.0, 2.0, 3.0};
  EXPECT_THROW(blastdose::score_stream(bad, 30), std::invalid_argument);
  const auto empty = blastdose::score_stream(FeatureStream{}, 30);
  EXPECT_TRUE(empty.timestamps.empty());
  EXPECT_TRUE(empty.z_smoothed.empty());
}

}  // namespace
