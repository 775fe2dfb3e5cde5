// Ground-truth generator checks: waveform math, schedule determinism, dose
// round trips through the measurement pipeline, detector recall on generated
// physiology, and the direction/magnitude of dose-coupled feature drift.
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blastdose/analysis.hpp"
#include "blastdose/dosimetry.hpp"
#include "blastdose/eog.hpp"
#include "blastdose/motion.hpp"
#include "blastdose/synth.hpp"

namespace {

using namespace blastdose;

double trapezoid_positive_area(const SampledSignal& s) {
  double area = 0.0;
  const double dt = 1.0 / s.sample_rate_hz;
  for (std::size_t i = 0; i + 1 < s.samples.size(); ++i) {
    const double a = std::max(0.0, s.samples[i]);
    const double b = std::max(0.0, s.samples[i + 1]);
    if (s.samples[i] <= 0.0 && i > 0) break;  // end of the positive phase
    area += 0.5 * (a + b) * dt;
  }
  return area;
}

SessionPlan single_session_plan(std::uint64_t seed) {
  CohortConfig cfg;
  cfg.master_seed = seed;
  cfg.n_subjects = 3;
  cfg.base_sessions = 1;
  cfg.extra_session_subjects = 0;
  auto planned = plan_cohort(cfg);
  return planned.front().plan;
}

struct EogDerived {
  SampledSignal v10, v25, h10;
  std::vector<bool> vmask, hmask;
};

EogDerived derive_eog(const SyntheticSession& s) {
  EogDerived d;
  d.v10 = bandpass(s.veog, 0.1, 10.0, 3);
  d.v25 = bandpass(s.veog, 0.1, 25.0, 3);
  d.vmask = artifact_mask(d.v10);
  if (s.dual_eog) {
    d.h10 = bandpass(s.heog, 0.1, 10.0, 3);
    d.hmask = artifact_mask(d.h10);
  }
  return d;
}

// Greedy one-to-one matching between truth times and detections.
template <typename GetTime, typename Events>
int match_count(const std::vector<double>& truth_times, const Events& detected,
                GetTime get_time, double tol_s) {
  std::vector<bool> used(detected.size(), false);
  int matched = 0;
  for (double t : truth_times) {
    double best = tol_s;
    std::size_t best_j = detected.size();
    for (std::size_t j = 0; j < detected.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(get_time(detected[j]) - t);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    if (best_j < detected.size()) {
      used[best_j] = true;
      ++matched;
    }
  }
  return matched;
}

TEST(Synth, FriedlanderMatchesClosedFormPeakAndImpulse) {
  for (double rate : {50000.0, 64000.0}) {
    const double peak = 2000.0, td_ms = 1.8;
    const SampledSignal w = friedlander(peak, td_ms, rate);
    EXPECT_EQ(w.samples[0], peak);  // first sample is the peak exactly
    // Zero crossing at t_d.
    const std::size_t i_td = std::size_t(td_ms / 1000.0 * rate);
    EXPECT_NEAR(w.samples[i_td] / peak, 0.0, 2e-3);
    // Tail padding is exactly zero.
    EXPECT_EQ(w.samples.back(), 0.0);
    // Positive impulse matches peak * t_d / e.
    const double analytic = peak * td_ms / 1000.0 * std::exp(-1.0);
    EXPECT_NEAR(trapezoid_positive_area(w) / analytic, 1.0, 5e-3);
  }
  EXPECT_THROW(friedlander(0.0, 1.0, 1000.0), std::invalid_argument);
  EXPECT_THROW(friedlander(1.0, -1.0, 1000.0), std::invalid_argument);
}

TEST(Synth, CohortPlanIsDeterministicAndShaped) {
  CohortConfig cfg;
  cfg.case_subject = 5;
  const auto a = plan_cohort(cfg);
  const auto b = plan_cohort(cfg);
  ASSERT_EQ(a.size(), 91u);  // 28 subjects, 3 each, 7 with one extra
  ASSERT_EQ(b.size(), a.size());
  int dual = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].plan.session_id, b[i].plan.session_id);
    EXPECT_EQ(a[i].plan.seed, b[i].plan.seed);
    ASSERT_EQ(a[i].plan.events.size(), b[i].plan.events.size());
    for (std::size_t e = 0; e < a[i].plan.events.size(); ++e) {
      EXPECT_EQ(a[i].plan.events[e].time_s, b[i].plan.events[e].time_s);
      EXPECT_EQ(a[i].plan.events[e].level_db, b[i].plan.events[e].level_db);
    }
    dual += a[i].plan.dual_eog ? 1 : 0;
    // Levels stay clear of every accumulation threshold.
    for (const auto& ev : a[i].plan.events) {
      if (ev.artifact) continue;
      for (double t : kDoseThresholdsDb) {
        EXPECT_GT(std::abs(ev.level_db - t), 0.29);
      }
    }
  }
  EXPECT_GT(dual, 18);  // ~40% of 91
  EXPECT_LT(dual, 55);
  // Case subject carries the configured profile; everyone else defaults.
  for (const auto& ps : a) {
    if (ps.subject_index == 5) {
      EXPECT_EQ(ps.profile.coupling_threshold_db, 155.0);
      EXPECT_EQ(ps.profile.onset_count, 12.0);
      EXPECT_EQ(ps.profile.susceptibility, 6.0);
    } else {
      EXPECT_EQ(ps.profile.coupling_threshold_db, 160.0);
      EXPECT_GE(ps.profile.susceptibility, 0.7);
      EXPECT_LE(ps.profile.susceptibility, 1.3);
    }
  }
}

TEST(Synth, GenerationIsBitwiseDeterministic) {
  SubjectProfile profile;
  profile.subject_id = "S00";
  SessionPlan plan = single_session_plan(77);
  plan.dual_eog = true;
  const SyntheticSession a = gen_session(profile, plan);
  const SyntheticSession b = gen_session(profile, plan);
  ASSERT_EQ(a.veog.samples.size(), b.veog.samples.size());
  EXPECT_TRUE(a.veog.samples == b.veog.samples);
  EXPECT_TRUE(a.heog.samples == b.heog.samples);
  EXPECT_TRUE(a.accel.axes[0] == b.accel.axes[0]);
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i)
    EXPECT_TRUE(a.events[i].high_gain_channel.samples ==
                b.events[i].high_gain_channel.samples);
  ASSERT_EQ(a.truth.blinks.size(), b.truth.blinks.size());
  EXPECT_EQ(a.truth.final_drift, b.truth.final_drift);
}

TEST(Synth, AnalyticTotalsMatchMeasurementPipeline) {
  SubjectProfile profile;
  profile.subject_id = "S00";
  SessionPlan plan = single_session_plan(42);
  // Force a loud tail event so the clipped high-gain path is exercised.
  ScheduledEvent loud;
  loud.time_s = plan.duration_s / 2.0;
  loud.level_db = 172.4;
  loud.duration_ms = 1.9;
  plan.events.push_back(loud);
  std::sort(plan.events.begin(), plan.events.end(),
            [](const ScheduledEvent& a, const ScheduledEvent& b) {
              return a.time_s < b.time_s;
            });
  const SyntheticSession s = gen_session(profile, plan);

  DoseConfig dcfg;
  std::vector<EventMetrics> metrics;
  for (const auto& ev : s.events) metrics.push_back(event_metrics(ev, dcfg));
  const SessionDose dose =
      session_summary(s.session_id, s.subject_id, metrics, {}, dcfg);

  EXPECT_EQ(dose.artifact_count, 2);
  EXPECT_FALSE(dose.discarded);
  for (std::size_t m = 0; m < 4; ++m) {
    for (std::size_t t = 0; t < 7; ++t) {
      const double truth = s.truth.dose_totals[m][t];
      const double measured = dose.totals[m][t];
      if (m == 0) {
        EXPECT_EQ(measured, truth) << "count threshold " << t;
      } else if (m == 3) {
        if (std::isinf(truth))
          EXPECT_TRUE(std::isinf(measured));
        else
          EXPECT_NEAR(measured, truth, 0.0434) << "level threshold " << t;
      } else if (truth > 0.0) {
        EXPECT_NEAR(measured / truth, 1.0, 0.01) << "metric " << m << " t " << t;
      } else {
        EXPECT_EQ(measured, 0.0);
      }
    }
  }
}

TEST(Synth, InjectedArtifactsAreClassifiedAndRealEventsKept) {
  DoseConfig dcfg;
  int checked = 0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    SubjectProfile profile;
    profile.subject_id = "S00";
    const SessionPlan plan = single_session_plan(seed);
    const SyntheticSession s = gen_session(profile, plan);
    ASSERT_EQ(s.events.size(), plan.events.size());
    for (std::size_t i = 0; i < s.events.size(); ++i) {
      const EventMetrics m = event_metrics(s.events[i], dcfg);
      EXPECT_EQ(m.is_artifact, plan.events[i].artifact)
          << "seed " << seed << " event " << i << " score " << m.artifact_score;
      ++checked;
    }
  }
  EXPECT_GT(checked, 40);
}

TEST(Synth, SessionDiscardedWhenArtifactsExceedBudget) {
  CohortConfig cfg;
  cfg.master_seed = 5;
  cfg.n_subjects = 3;
  cfg.base_sessions = 1;
  cfg.extra_session_subjects = 0;
  cfg.artifact_events = 21;
  const auto planned = plan_cohort(cfg);
  const SyntheticSession s =
      gen_session(planned[0].profile, planned[0].plan);
  DoseConfig dcfg;
  std::vector<EventMetrics> metrics;
  for (const auto& ev : s.events) metrics.push_back(event_metrics(ev, dcfg));
  const SessionDose dose =
      session_summary(s.session_id, s.subject_id, metrics, {}, dcfg);
  EXPECT_EQ(dose.artifact_count, 21);
  EXPECT_TRUE(dose.discarded);
}

TEST(Synth, BlinkDetectionRecallPrecisionAndMaskedIsolation) {
  SubjectProfile profile;  // susceptibility irrelevant for detection
  profile.subject_id = "S00";
  profile.susceptibility = 0.0;
  SessionPlan plan = single_session_plan(101);
  plan.dual_eog = false;
  const SyntheticSession s = gen_session(profile, plan);
  const EogDerived d = derive_eog(s);
  const std::vector<BlinkEvent> found = detect_blinks(d.v10, d.v25, d.vmask);

  std::vector<double> clean_times, masked_times;
  for (const auto& b : s.truth.blinks)
    (b.masked ? masked_times : clean_times).push_back(b.time_s);
  ASSERT_GT(clean_times.size(), 700u);
  ASSERT_GE(masked_times.size(), 2u);

  const int hits = match_count(
      clean_times, found, [](const BlinkEvent& b) { return b.peak_time; }, 0.15);
  const double recall = double(hits) / double(clean_times.size());
  const double precision = double(hits) / double(found.size());
  EXPECT_GE(recall, 0.95) << "found " << found.size();
  EXPECT_GE(precision, 0.95) << "found " << found.size();
  // Nothing may be reported where truth says the signal was masked.
  for (double mt : masked_times)
    for (const auto& b : found)
      EXPECT_GT(std::abs(b.peak_time - mt), 0.3);
}

TEST(Synth, SaccadeDetectionFindsPlantedSteps) {
  int truth_total = 0, hit_total = 0, found_total = 0;
  for (std::uint64_t seed : {201u, 202u, 203u, 204u}) {
    SubjectProfile profile;
    profile.subject_id = "S00";
    profile.susceptibility = 0.0;
    SessionPlan plan = single_session_plan(seed);
    plan.dual_eog = true;
    const SyntheticSession s = gen_session(profile, plan);
    const EogDerived d = derive_eog(s);
    const auto found = detect_saccades(d.v10, d.h10, d.vmask, d.hmask);
    std::vector<double> truth_times;
    for (const auto& sc : s.truth.saccades) truth_times.push_back(sc.time_s);
    truth_total += int(truth_times.size());
    found_total += int(found.size());
    hit_total += match_count(
        truth_times, found,
        [](const SaccadeEvent& e) { return e.onset_time; }, 0.25);
  }
  ASSERT_GE(truth_total, 20);
  EXPECT_GE(double(hit_total) / double(truth_total), 0.95)
      << "found " << found_total << " truth " << truth_total;
  EXPECT_GE(double(hit_total) / double(found_total), 0.95)
      << "found " << found_total;
}

TEST(Synth, MotionFeaturesPassInclusionGates) {
  SubjectProfile profile;
  profile.subject_id = "S00";
  profile.susceptibility = 0.0;
  const SessionPlan plan = single_session_plan(301);
  const SyntheticSession s = gen_session(profile, plan);
  const SessionMotionFeatures f = extract_session_features(s.accel);
  ASSERT_GE(f.gait.size(), 25u);
  ASSERT_GE(f.balance.size(), 25u);
  EXPECT_GT(f.gait.back().frame_time - f.gait.front().frame_time, 3600.0);
  EXPECT_GT(f.balance.back().frame_time - f.balance.front().frame_time, 3600.0);
  for (const auto& g : f.gait) {
    ASSERT_EQ(g.raw_tde.size(), 105u);
    for (double v : g.raw_tde) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(Synth, CoupledSubjectDriftsInTheConfiguredDirections) {
  SubjectProfile profile;
  profile.subject_id = "S09";
  profile.susceptibility = 5.0;
  profile.coupling_threshold_db = 155.0;
  profile.onset_count = 0.0;

  SessionPlan plan = single_session_plan(401);
  // Replace the schedule: a burst of strong events mid-session splits the
  // session into a clean baseline and a saturated tail.
  plan.events.clear();
  Rng rng(9);
  for (int e = 0; e < 24; ++e) {
    ScheduledEvent ev;
    ev.time_s = 1500.0 + 15.0 * double(e);
    ev.level_db = 162.5;
    ev.duration_ms = 1.8;
    plan.events.push_back(ev);
  }
  plan.dual_eog = true;
  const SyntheticSession s = gen_session(profile, plan);
  EXPECT_GT(s.truth.final_drift, 5.0);
  ASSERT_EQ(s.truth.supra_times.size(), 24u);

  // Blink durations shrink.
  std::vector<double> early_b, late_b;
  for (const auto& b : s.truth.blinks) {
    if (b.masked) continue;
    if (b.time_s < 1400.0) early_b.push_back(b.duration_ms);
    if (b.time_s > 2100.0) late_b.push_back(b.duration_ms);
  }
  ASSERT_GT(early_b.size(), 50u);
  ASSERT_GT(late_b.size(), 50u);
  const double mean_early =
      std::accumulate(early_b.begin(), early_b.end(), 0.0) / double(early_b.size());
  const double mean_late =
      std::accumulate(late_b.begin(), late_b.end(), 0.0) / double(late_b.size());
  EXPECT_LT(mean_late, 0.75 * mean_early);

  // Saccade amplitudes shrink (truth carries the applied multiplier).
  for (const auto& sc : s.truth.saccades) {
    if (sc.time_s > 2100.0) {
      EXPECT_LT(sc.amplitude_mv, 0.95);
    }
    if (sc.time_s < 1400.0) {
      EXPECT_GT(sc.amplitude_mv, 0.99);
    }
  }

  // Path length rises, gait fine-structure eigenvalue falls.
  const SessionMotionFeatures f = extract_session_features(s.accel);
  std::vector<double> early_pl, late_pl, early_eig, late_eig;
  for (const auto& b : f.balance) {
    if (b.frame_time < 1400.0) early_pl.push_back(b.path_length);
    if (b.frame_time > 2100.0) late_pl.push_back(b.path_length);
  }
  for (const auto& g : f.gait) {
    if (g.frame_time < 1400.0) early_eig.push_back(g.raw_tde[9]);
    if (g.frame_time > 2100.0) late_eig.push_back(g.raw_tde[9]);
  }
  ASSERT_GT(early_pl.size(), 10u);
  ASSERT_GT(late_pl.size(), 10u);
  ASSERT_GT(early_eig.size(), 10u);
  ASSERT_GT(late_eig.size(), 10u);
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  };
  EXPECT_GT(mean(late_pl), 1.1 * mean(early_pl));
  EXPECT_LT(mean(late_eig), 0.9 * mean(early_eig));
}

TEST(Synth, NullSubjectHasNoDriftAndStationaryPhysiology) {
  SubjectProfile profile;
  profile.subject_id = "S01";
  profile.susceptibility = 0.0;
  const SessionPlan plan = single_session_plan(501);
  const SyntheticSession s = gen_session(profile, plan);
  EXPECT_EQ(s.truth.final_drift, 0.0);
  std::vector<double> early, late;
  for (const auto& b : s.truth.blinks) {
    if (b.masked) continue;
    (b.time_s < plan.duration_s / 2 ? early : late).push_back(b.duration_ms);
  }
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  };
  EXPECT_NEAR(mean(late) / mean(early), 1.0, 0.05);
}

TEST(Synth, LabelStreamCountsEventsAboveTrainingThreshold) {
  SubjectProfile profile;
  profile.subject_id = "S00";
  const SessionPlan plan = single_session_plan(601);
  const SyntheticSession s = gen_session(profile, plan);
  std::size_t expected = 0;
  for (const auto& ev : plan.events)
    if (!ev.artifact && ev.level_db > 160.0) ++expected;
  ASSERT_EQ(s.truth.label_values.size(), expected);
  for (std::size_t i = 0; i < expected; ++i) {
    EXPECT_EQ(s.truth.label_values[i], double(i + 1));
    if (i > 0) {
      EXPECT_GE(s.truth.label_times[i], s.truth.label_times[i - 1]);
    }
  }
}

TEST(Synth, ReactionTimeSeriesFlagOnlyDesignatedDrifters) {
  CohortConfig cfg;
  cfg.n_subjects = 8;
  const auto series = gen_anam(cfg, {2, 5});
  ASSERT_EQ(series.size(), 8u);
  for (const auto& r : series) {
    const ReactionTimeTrend t = anam_trend(r.days, r.reaction_ms);
    EXPECT_EQ(t.flagged, r.drifting) << r.subject_id;
    if (r.drifting) {
      EXPECT_NEAR(t.slope_ms_per_day, 0.03, 0.01);
    }
  }
}

}  // namespace
