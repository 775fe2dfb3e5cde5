// Cohort statistics: rank-correlation wrapper, dose-response sweep grid,
// metric similarity table, sensor ablation, feature direction pooling,
// reaction-time trend flagging, and the case-study crossing report.
#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "blastdose/analysis.hpp"
#include "blastdose/rng.hpp"

namespace {

using namespace blastdose;

TEST(Analysis, CorrelateMonotoneReverseAndInvariance) {
  std::vector<double> x, cubed, reversed;
  for (int i = 0; i < 9; ++i) x.push_back(double(i) - 4.0);
  for (double v : x) cubed.push_back(v * v * v);
  reversed = x;
  std::reverse(reversed.begin(), reversed.end());

  const CorrelationResult up = correlate(x, cubed);
  EXPECT_EQ(up.rho, 1.0);
  EXPECT_EQ(up.p_value, 0.0);
  EXPECT_EQ(up.n, 9u);
  EXPECT_EQ(correlate(x, reversed).rho, -1.0);

  // Rank methods ignore any strictly increasing transform.
  Rng rng(2);
  std::vector<double> a, b, ea;
  for (int i = 0; i < 25; ++i) {
    a.push_back(rng.normal(0.0, 1.0));
    b.push_back(rng.normal(0.0, 1.0));
  }
  for (double v : a) ea.push_back(std::exp(v));
  EXPECT_EQ(correlate(a, b).rho, correlate(ea, b).rho);
}

SessionRecord record_with_balance(const std::string& id, double dose_base,
                                  int n_obs, std::uint64_t seed) {
  SessionRecord r;
  r.session_id = id;
  r.subject_id = "subj_" + id;
  ObservationStream obs;
  Rng rng(seed);
  for (int i = 0; i < n_obs; ++i) {
    obs.timestamps.push_back(double(i) * 60.0);
    obs.rows.push_back({rng.normal(0.0, 1.0)});
  }
  r.modalities["balance"] = obs;
  for (int e = 0; e < 6; ++e) {
    r.dose_times.push_back(300.0 + 600.0 * e);
    r.dose_values.push_back(dose_base * double(e + 1));
  }
  return r;
}

TEST(Analysis, SweepPeaksAtInjectedColumnAndFlagsDegenerate) {
  std::vector<SessionScore> fused;
  std::vector<SessionDose> doses;
  std::vector<SessionRecord> records;
  Rng rng(7);
  for (int i = 0; i < 12; ++i) {
    const std::string id = "s" + std::to_string(i);
    const double hidden = double(i + 1);
    SessionScore f;
    f.session_id = id;
    f.modality = "fused";
    f.timestamps = {0.0};
    f.llr = {hidden};
    f.max_score = hidden;
    fused.push_back(f);

    SessionDose d;
    d.session_id = id;
    for (std::size_t m = 0; m < 4; ++m)
      for (std::size_t t = 0; t < 7; ++t) d.totals[m][t] = rng.uniform(0.0, 50.0);
    d.totals[0][4] = hidden;       // injected coupling column
    d.totals[1][0] = 5.0;          // constant column -> undefined cell
    doses.push_back(d);

    records.push_back(record_with_balance(id, hidden, 62, std::uint64_t(i)));
  }
  // Unmatched entries on both sides are dropped and counted.
  SessionScore orphan;
  orphan.session_id = "orphan_score";
  orphan.timestamps = {0.0};
  orphan.llr = {1.0};
  orphan.max_score = 1.0;
  fused.push_back(orphan);
  SessionDose orphan_dose;
  orphan_dose.session_id = "orphan_dose";
  doses.push_back(orphan_dose);

  const SweepResult sweep = dose_response_sweep(fused, doses, records);
  EXPECT_EQ(sweep.dropped_sessions, 2);
  EXPECT_NEAR(sweep.rho[0][4], 1.0, 1e-12);
  EXPECT_TRUE(std::isnan(sweep.rho[1][0]));
  for (std::size_t m = 0; m < 4; ++m)
    for (std::size_t t = 0; t < 7; ++t) {
      if (m == 0 && t == 4) continue;
      if (std::isnan(sweep.rho[m][t])) continue;
      EXPECT_LT(std::abs(sweep.rho[m][t]), 1.0);
    }
  // Identical session durations make the duration baseline degenerate.
  EXPECT_TRUE(std::isnan(sweep.duration_baseline_rho));

  std::vector<SessionScore> two(fused.begin(), fused.begin() + 2);
  std::vector<SessionDose> two_doses(doses.begin(), doses.begin() + 2);
  EXPECT_THROW(dose_response_sweep(two, two_doses, records),
               std::invalid_argument);
}

TEST(Analysis, DurationBaselineSeparatesUnequalSessions) {
  // Durations 1..8 hours and dose totals that grow with duration: the
  // elapsed-time model alone correlates strongly.
  std::vector<SessionScore> fused;
  std::vector<SessionDose> doses;
  std::vector<SessionRecord> records;
  for (int i = 0; i < 8; ++i) {
    const std::string id = "s" + std::to_string(i);
    SessionScore f;
    f.session_id = id;
    f.timestamps = {0.0};
    f.llr = {double(i % 3)};  // scores carry no signal here
    f.max_score = double(i % 3);
    fused.push_back(f);
    SessionDose d;
    d.session_id = id;
    d.totals[0][4] = double(i + 1);
    doses.push_back(d);
    records.push_back(record_with_balance(id, double(i + 1), 61 * (i + 1),
                                          std::uint64_t(50 + i)));
  }
  const SweepResult sweep = dose_response_sweep(fused, doses, records);
  EXPECT_TRUE(std::isfinite(sweep.duration_baseline_rho));
  EXPECT_GT(sweep.duration_baseline_rho, 0.5);
}

TEST(Analysis, MetricSimilarityTableSymmetricUnitDiagonal) {
  std::vector<SessionDose> doses;
  Rng rng(11);
  for (int i = 0; i < 10; ++i) {
    SessionDose d;
    d.session_id = "s" + std::to_string(i);
    for (std::size_t m = 0; m < 4; ++m)
      for (std::size_t t = 0; t < 7; ++t) d.totals[m][t] = rng.uniform(0.0, 9.0);
    d.totals[1][2] = std::exp(d.totals[0][2]);  // monotone in metric 0
    doses.push_back(d);
  }
  // A discarded session with wild values must be ignored entirely.
  SessionDose bad;
  bad.session_id = "bad";
  bad.discarded = true;
  bad.totals[0][2] = 1e9;
  bad.totals[1][2] = -1e9;
  doses.push_back(bad);

  const auto table = metric_similarity(doses, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(table[i][i], 1.0);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(table[i][j], table[j][i]);
      if (!std::isnan(table[i][j])) {
        EXPECT_LE(std::abs(table[i][j]), 1.0);
      }
    }
  }
  EXPECT_NEAR(table[0][1], 1.0, 1e-12);

  std::vector<SessionDose> two(doses.begin(), doses.begin() + 2);
  EXPECT_THROW(metric_similarity(two, 0), std::invalid_argument);
}

SessionScore point_score(const std::string& session_id,
                         const std::string& modality, double value) {
  SessionScore s;
  s.session_id = session_id;
  s.subject_id = "subj";
  s.modality = modality;
  s.timestamps = {0.0};
  s.llr = {value};
  s.max_score = value;
  return s;
}

TEST(Analysis, AblationRowsMatchUnfusedAndRankConfigurations) {
  std::vector<SessionScore> scores;
  std::vector<SessionDose> doses;
  std::vector<double> dose_vec, blink_vec;
  Rng rng(13);
  for (int i = 0; i < 10; ++i) {
    const std::string id = "s" + std::to_string(i);
    const double dose = double(i + 1);
    SessionDose d;
    d.session_id = id;
    d.totals[0][4] = dose;
    doses.push_back(d);
    dose_vec.push_back(dose);

    // Accelerometry carries the signal; the blink channel is pure noise.
    scores.push_back(point_score(id, "gait", dose));
    scores.push_back(point_score(id, "balance", dose));
    const double blink = rng.normal(0.0, 10.0);
    scores.push_back(point_score(id, "blink", blink));
    blink_vec.push_back(blink);
    if (i < 4) scores.push_back(point_score(id, "saccade", rng.normal(0.0, 10.0)));
  }
  const auto rows = ablation(scores, doses);
  ASSERT_EQ(rows.size(), 5u);
  std::map<std::string, AblationRow> by_name;
  for (const auto& r : rows) by_name[r.name] = r;

  // Single-modality row equals the unfused correlation of that modality.
  EXPECT_TRUE(by_name.at("eog1").available);
  EXPECT_EQ(by_name.at("eog1").corr.rho, correlate(blink_vec, dose_vec).rho);
  EXPECT_EQ(by_name.at("eog1").corr.n, 10u);

  // Signal lives in accelerometry: its row dominates, and mixing in a
  // pure-noise modality drags the correlation down.
  EXPECT_NEAR(by_name.at("accel").corr.rho, 1.0, 1e-12);
  EXPECT_LT(by_name.at("eog1").corr.rho, by_name.at("accel").corr.rho);
  EXPECT_LT(by_name.at("accel_eog1").corr.rho, by_name.at("accel").corr.rho);

  // Dual-channel rows only see the sessions that recorded saccades.
  EXPECT_TRUE(by_name.at("eog2").available);
  EXPECT_EQ(by_name.at("eog2").corr.n, 4u);
  EXPECT_EQ(by_name.at("accel_eog2").corr.n, 4u);

  // A configuration with no qualifying sessions is marked unavailable.
  const auto custom = ablation(scores, doses, 0, 4,
                               {{"missing", {"emg"}, {}}});
  ASSERT_EQ(custom.size(), 1u);
  EXPECT_FALSE(custom[0].available);
}

std::vector<SessionRecord> direction_records(double gain, std::uint64_t seed,
                                             int n_sessions) {
  std::vector<SessionRecord> records;
  Rng rng(seed);
  for (int s = 0; s < n_sessions; ++s) {
    SessionRecord r;
    r.session_id = "s" + std::to_string(s);
    r.subject_id = r.session_id;
    for (int e = 0; e < 6; ++e) {
      r.dose_times.push_back(300.0 + 600.0 * e);
      r.dose_values.push_back(double(e + 1) * (1.0 + 0.3 * double(s)));
    }
    ObservationStream obs;
    for (int i = 0; i < 80; ++i) {
      const double t = double(i) * 45.0;
      obs.timestamps.push_back(t);
      obs.rows.push_back({gain * dose_label_at(r, t) + rng.normal(0.0, 0.05)});
    }
    r.modalities["balance"] = obs;
    records.push_back(r);
  }
  return records;
}

TEST(Analysis, FeatureDirectionRecoversSignsAndNull) {
  const auto up = pooled_feature_dose(direction_records(0.02, 3, 15),
                                      "balance", 0, 20);
  ASSERT_EQ(up.first.size(), 15u * 80u);
  EXPECT_GT(correlate(up.first, up.second).rho, 0.3);

  const auto down = pooled_feature_dose(direction_records(-0.02, 3, 15),
                                        "balance", 0, 20);
  EXPECT_LT(correlate(down.first, down.second).rho, -0.3);

  const auto none = pooled_feature_dose(direction_records(0.0, 17, 15),
                                        "balance", 0, 20);
  ASSERT_GT(none.first.size(), 1000u);
  EXPECT_LT(std::abs(correlate(none.first, none.second).rho), 0.1);
}

TEST(Analysis, FeatureDirectionColumnSelection) {
  // Signal planted only in the designated eigenvalue column of wide rows.
  std::vector<SessionRecord> records;
  Rng rng(23);
  for (int s = 0; s < 6; ++s) {
    SessionRecord r;
    r.session_id = "g" + std::to_string(s);
    r.subject_id = r.session_id;
    for (int e = 0; e < 6; ++e) {
      r.dose_times.push_back(300.0 + 600.0 * e);
      r.dose_values.push_back(double(e + 1) * (1.0 + 0.5 * double(s)));
    }
    ObservationStream obs;
    for (int i = 0; i < 70; ++i) {
      const double t = double(i) * 50.0;
      obs.timestamps.push_back(t);
      std::vector<double> row(12);
      for (int c = 0; c < 12; ++c) row[std::size_t(c)] = rng.normal(0.0, 0.05);
      row[kGaitDirectionColumn] -= 0.03 * dose_label_at(r, t);
      obs.rows.push_back(row);
    }
    r.modalities["gait"] = obs;
    records.push_back(r);
  }
  const auto pooled = pooled_feature_dose(records, "gait",
                                          kGaitDirectionColumn, 30);
  EXPECT_LT(correlate(pooled.first, pooled.second).rho, -0.3);
  EXPECT_THROW(pooled_feature_dose(records, "gait", 12, 30),
               std::invalid_argument);
}

TEST(Analysis, AnamTrendFlagsOnlySignificantPositiveDrift) {
  Rng rng(31);
  std::vector<double> days, flat, rising, falling;
  for (int i = 0; i < 36; ++i) {
    days.push_back(30.4 * double(i));
    flat.push_back(250.0 + rng.normal(0.0, 0.5));
    rising.push_back(250.0 + 0.5 * days.back() + rng.normal(0.0, 5.0));
    falling.push_back(250.0 - 0.5 * days.back() + rng.normal(0.0, 5.0));
  }
  EXPECT_FALSE(anam_trend(days, flat).flagged);
  const ReactionTimeTrend up = anam_trend(days, rising);
  EXPECT_TRUE(up.flagged);
  EXPECT_NEAR(up.slope_ms_per_day, 0.5, 0.1);
  const ReactionTimeTrend down = anam_trend(days, falling);
  EXPECT_FALSE(down.flagged);
  EXPECT_LT(down.p_value, 1e-3);  // significant, but negative

  std::vector<double> four(days.begin(), days.begin() + 4);
  std::vector<double> four_y(flat.begin(), flat.begin() + 4);
  EXPECT_THROW(anam_trend(four, four_y), std::invalid_argument);
  std::vector<double> const_days(10, 5.0);
  std::vector<double> any(10, 1.0);
  any[3] = 2.0;
  EXPECT_THROW(anam_trend(const_days, any), std::invalid_argument);
}

TEST(Analysis, AnamSlopeEstimateIsUnbiased) {
  Rng rng(37);
  std::vector<double> days;
  for (int i = 0; i < 36; ++i) days.push_back(30.4 * double(i));
  std::vector<double> slopes;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> y;
    for (double d : days) y.push_back(100.0 + 0.5 * d + rng.normal(0.0, 5.0));
    slopes.push_back(anam_trend(days, y).slope_ms_per_day);
  }
  double mean = 0.0;
  for (double s : slopes) mean += s;
  mean /= double(slopes.size());
  double var = 0.0;
  for (double s : slopes) var += (s - mean) * (s - mean);
  var /= double(slopes.size() - 1);
  const double sem = std::sqrt(var / double(slopes.size()));
  EXPECT_NEAR(mean, 0.5, 2.0 * sem);
}

TEST(Analysis, CaseStudyReportsDoseAtFirstCrossing) {
  std::vector<SessionScore> fused;
  SessionScore s1;
  s1.session_id = "s1";
  s1.modality = "fused";
  s1.timestamps = {0.0, 60.0, 120.0, 180.0};
  s1.llr = {0.5, 1.0, 2.5, 3.0};
  s1.max_score = 3.0;
  fused.push_back(s1);
  SessionScore s2;
  s2.session_id = "s2";
  s2.modality = "fused";
  s2.timestamps = {0.0, 60.0};
  s2.llr = {0.1, 0.2};
  s2.max_score = 0.2;
  fused.push_back(s2);

  std::map<std::string, std::array<DoseSeries, 4>> dose_series;
  std::array<DoseSeries, 4> arr;
  arr[0].timestamps = {50.0, 100.0, 150.0};
  arr[0].cumulative_values = {3.0, 7.0, 12.0};
  arr[1].timestamps = {50.0, 110.0};
  arr[1].cumulative_values = {1.5, 4.5};
  arr[2].timestamps = {130.0};
  arr[2].cumulative_values = {9.0};
  arr[3].timestamps = {100.0};
  arr[3].cumulative_values = {80.0};
  dose_series["s1"] = arr;

  const auto rows = case_study_report(fused, dose_series, 2.0);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].session_id, "s1");
  EXPECT_TRUE(rows[0].crossed);
  EXPECT_EQ(rows[0].crossing_time, 120.0);
  EXPECT_EQ(rows[0].dose_at_crossing[0], 7.0);
  EXPECT_EQ(rows[0].dose_at_crossing[1], 4.5);
  EXPECT_EQ(rows[0].dose_at_crossing[2], 0.0);  // not yet accumulated
  EXPECT_EQ(rows[0].dose_at_crossing[3], 80.0);
  EXPECT_EQ(rows[1].session_id, "s2");
  EXPECT_FALSE(rows[1].crossed);
}

}  // namespace
