#pragma once
// Ground-truth session generator: two-channel blast waveforms, EOG with
// blinks/saccades/artifact bursts, tri-axial accelerometry with gait and
// low-movement bouts, and a configurable dose-physiology coupling. The truth
// ledger carries everything acceptance tests need to verify the pipeline.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "blastdose/dosimetry.hpp"
#include "blastdose/motion.hpp"
#include "blastdose/rng.hpp"
#include "blastdose/signal.hpp"

namespace blastdose {

// Per-feature drift directions: gait eigenvalues and blink durations fall
// with dose, path length rises, saccade amplitudes fall.
struct FeatureSigns {
  int gait_eigenvalue = -1;
  int path_length = +1;
  int blink_duration = -1;
  int saccade_amplitude = -1;
};

struct SubjectProfile {
  std::string subject_id;
  double susceptibility = 1.0;          // coupling gain, >= 0
  double coupling_threshold_db = 160.0; // events at or below do not couple
  double onset_count = 0.0;             // drift starts past this many events
  FeatureSigns signs;
};

struct ScheduledEvent {
  double time_s = 0.0;
  double level_db = 150.0;
  double duration_ms = 1.8;  // positive-phase duration
  bool artifact = false;     // uncorrelated noise burst, not a real blast
};

struct ActivityWindow {
  double start_s = 0.0;
  double duration_s = 0.0;
  bool gait = false;  // otherwise low-movement
};

struct SessionPlan {
  std::string session_id;
  double duration_s = 3800.0;
  std::vector<ScheduledEvent> events;  // time-sorted
  std::vector<ActivityWindow> activity;
  std::vector<double> artifact_burst_times;  // EOG artifact episodes
  double artifact_burst_s = 2.5;
  bool dual_eog = true;
  int saccade_count = 6;
  std::uint64_t seed = 0;
};

// Multiplier gains applied as exp(sign * gain * drift), clamped so features
// saturate rather than vanish.
struct CouplingGains {
  double blink_duration = 0.12;
  double saccade_amplitude = 0.08;
  double gait_noise = 0.10;
  double path_length = 0.15;
};

struct TruthBlink {
  double time_s = 0.0;
  double duration_ms = 0.0;
  bool masked = false;  // placed inside an injected artifact burst
};

struct TruthSaccade {
  double time_s = 0.0;
  double amplitude_mv = 0.0;
};

struct SessionTruth {
  std::vector<double> supra_times;   // real events above the coupling threshold
  std::vector<TruthBlink> blinks;
  std::vector<TruthSaccade> saccades;
  // Analytic dose totals over the real (non-artifact) events,
  // kAllDoseMetrics x kDoseThresholdsDb.
  std::array<std::array<double, 7>, 4> dose_totals{};
  // Canonical training labels: cumulative blast count above 160 dB.
  std::vector<double> label_times;
  std::vector<double> label_values;
  double final_drift = 0.0;
};

struct SyntheticSession {
  std::string session_id;
  std::string subject_id;
  std::vector<BlastEvent> events;  // artifacts included, as recorded
  SampledSignal veog;
  SampledSignal heog;  // empty when the session has a single EOG channel
  bool dual_eog = true;
  AccelSignal accel;
  SessionTruth truth;
};

// Classic blast waveform: peak * (1 - t/t_d) * exp(-t/t_d) over [0, 5*t_d],
// zero-padded to 8*t_d. The first sample equals the peak exactly and the
// waveform crosses zero at t_d.
inline SampledSignal friedlander(double peak_pa, double t_d_ms, double rate_hz) {
  if (!(peak_pa > 0.0) || !(t_d_ms > 0.0) || !(rate_hz > 0.0))
    throw std::invalid_argument("friedlander: peak, duration, rate must be positive");
  const double td = t_d_ms / 1000.0;
  const std::size_t n_formula = std::size_t(std::floor(5.0 * td * rate_hz)) + 1;
  const std::size_t n_total = std::size_t(std::lround(8.0 * td * rate_hz));
  SampledSignal s;
  s.sample_rate_hz = rate_hz;
  s.samples.assign(std::max(n_formula, n_total), 0.0);
  for (std::size_t i = 0; i < n_formula; ++i) {
    const double x = double(i) / rate_hz / td;
    s.samples[i] = peak_pa * (1.0 - x) * std::exp(-x);
  }
  return s;
}

namespace detail {

inline std::uint64_t mix_stream(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t s = seed + 0x7f4a7c15ULL * (salt + 1);
  return splitmix64(s);
}

// Drift at time t: susceptibility-scaled, saturating in the number of
// supra-threshold events past the onset count.
inline double drift_at(const std::vector<double>& supra_times,
                       const SubjectProfile& profile, double t) {
  const auto it = std::upper_bound(supra_times.begin(), supra_times.end(), t);
  const double count = double(it - supra_times.begin());
  const double effective = std::max(0.0, count - profile.onset_count);
  return profile.susceptibility * std::log1p(effective);
}

inline double clamped_gain(int sign, double gain, double drift, double lo,
                           double hi) {
  return std::clamp(std::exp(double(sign) * gain * drift), lo, hi);
}

inline BlastEvent real_event_waveform(const ScheduledEvent& ev, Rng* rng) {
  constexpr double kRate = 64000.0;
  constexpr double kNoiseFrac = 0.005;
  const double peak = dbspl_to_pa(ev.level_db);
  const SampledSignal base = friedlander(peak, ev.duration_ms, kRate);
  BlastEvent e;
  e.event_time = ev.time_s;
  e.low_gain_channel.sample_rate_hz = kRate;
  e.high_gain_channel.sample_rate_hz = kRate;
  e.low_gain_channel.start_time = ev.time_s;
  e.high_gain_channel.start_time = ev.time_s;
  const double sigma = kNoiseFrac * peak;
  const double rail = 3556.6;  // high-gain hardware clamp
  e.low_gain_channel.samples.resize(base.samples.size());
  e.high_gain_channel.samples.resize(base.samples.size());
  for (std::size_t i = 0; i < base.samples.size(); ++i) {
    e.low_gain_channel.samples[i] = base.samples[i] + sigma * rng->normal();
    e.high_gain_channel.samples[i] =
        std::clamp(base.samples[i] + sigma * rng->normal(), -rail, rail);
  }
  return e;
}

// Artifact pseudo-event: independent decaying noise per channel, so the
// two-channel correlation check fails.
inline BlastEvent artifact_event_waveform(const ScheduledEvent& ev, Rng* rng) {
  constexpr double kRate = 64000.0;
  const double sigma = dbspl_to_pa(ev.level_db) / 3.0;
  const std::size_t n = std::size_t(std::lround(0.030 * kRate));
  BlastEvent e;
  e.event_time = ev.time_s;
  e.low_gain_channel.sample_rate_hz = kRate;
  e.high_gain_channel.sample_rate_hz = kRate;
  e.low_gain_channel.start_time = ev.time_s;
  e.high_gain_channel.start_time = ev.time_s;
  e.low_gain_channel.samples.resize(n);
  e.high_gain_channel.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double env = std::exp(-double(i) / kRate / 0.008);
    e.low_gain_channel.samples[i] = sigma * env * rng->normal();
    e.high_gain_channel.samples[i] = sigma * env * rng->normal();
  }
  return e;
}

inline bool near_any(const std::vector<double>& xs, double t, double radius) {
  for (double x : xs)
    if (std::abs(x - t) < radius) return true;
  return false;
}

}  // namespace detail

// Analytic dose totals from the schedule (artifacts excluded): counts, peak
// pressure sums, closed-form Friedlander impulse peak*t_d/e, and waveform
// energy 0.2495 * peak^2 * t_d folded into the 8-hour equivalent level.
inline std::array<std::array<double, 7>, 4> analytic_dose_totals(
    const std::vector<ScheduledEvent>& events) {
  std::array<std::array<double, 7>, 4> totals{};
  std::array<double, 7> energy{};
  for (const auto& ev : events) {
    if (ev.artifact) continue;
    const double peak_pa = dbspl_to_pa(ev.level_db);
    const double td_s = ev.duration_ms / 1000.0;
    for (std::size_t ti = 0; ti < kDoseThresholdsDb.size(); ++ti) {
      if (!(ev.level_db > kDoseThresholdsDb[ti])) continue;
      totals[0][ti] += 1.0;
      totals[1][ti] += dbspl_to_psi(ev.level_db);
      totals[2][ti] += pa_to_psi(peak_pa * td_s) * 1000.0 * std::exp(-1.0);
      energy[ti] += 0.2495 * peak_pa * peak_pa * td_s;
    }
  }
  for (std::size_t ti = 0; ti < 7; ++ti)
    totals[3][ti] =
        energy[ti] > 0.0
            ? 10.0 * std::log10(energy[ti] /
                                (kRefPressurePa * kRefPressurePa * kEightHoursS))
            : -std::numeric_limits<double>::infinity();
  return totals;
}

// Synthesizes one session from its plan: blast waveforms, EOG channels with
// blinks/saccades/artifact bursts, accelerometry with scheduled bouts, and
// the paired truth ledger. Deterministic in (profile, plan).
inline SyntheticSession gen_session(const SubjectProfile& profile,
                                    const SessionPlan& plan,
                                    const CouplingGains& gains = {}) {
  SyntheticSession out;
  out.session_id = plan.session_id;
  out.subject_id = profile.subject_id;
  out.dual_eog = plan.dual_eog;

  // --- Events -------------------------------------------------------------
  Rng rng_ev(detail::mix_stream(plan.seed, 1));
  for (const auto& ev : plan.events) {
    out.events.push_back(ev.artifact
                             ? detail::artifact_event_waveform(ev, &rng_ev)
                             : detail::real_event_waveform(ev, &rng_ev));
    if (!ev.artifact) {
      if (ev.level_db > profile.coupling_threshold_db)
        out.truth.supra_times.push_back(ev.time_s);
      if (ev.level_db > 160.0) {
        out.truth.label_times.push_back(ev.time_s);
        out.truth.label_values.push_back(double(out.truth.label_values.size() + 1));
      }
    }
  }
  out.truth.dose_totals = analytic_dose_totals(plan.events);
  out.truth.final_drift =
      detail::drift_at(out.truth.supra_times, profile, plan.duration_s);

  // --- EOG ------------------------------------------------------------------
  Rng rng_eog(detail::mix_stream(plan.seed, 2));
  constexpr double kEogRate = 500.0;
  constexpr double kEogNoise = 0.04;  // millivolts
  const std::size_t n_eog = std::size_t(plan.duration_s * kEogRate);
  std::vector<double> veog(n_eog, 0.0), heog(n_eog, 0.0);
  for (std::size_t i = 0; i < n_eog; ++i) {
    veog[i] = kEogNoise * rng_eog.normal();
    heog[i] = kEogNoise * rng_eog.normal();
  }
  for (double tb : plan.artifact_burst_times) {
    const std::size_t b0 = std::size_t(std::max(0.0, tb) * kEogRate);
    const std::size_t b1 = std::min<std::size_t>(
        n_eog, std::size_t((tb + plan.artifact_burst_s) * kEogRate));
    for (std::size_t i = b0; i < b1; ++i) {
      veog[i] += 10.0 * kEogNoise * rng_eog.normal();
      heog[i] += 10.0 * kEogNoise * rng_eog.normal();
    }
  }

  // Saccades: sigmoid steps, full amplitude horizontal plus a 0.75 vertical
  // component; amplitudes shrink with drift. Dual-channel sessions only.
  std::vector<double> saccade_times;
  if (plan.dual_eog) {
    int placed = 0;
    int guard = 0;
    while (placed < plan.saccade_count && guard < 1000) {
      ++guard;
      const double t = rng_eog.uniform(60.0, plan.duration_s - 60.0);
      if (detail::near_any(saccade_times, t, 8.0)) continue;
      bool near_burst = false;
      for (double tb : plan.artifact_burst_times)
        if (t > tb - 3.0 && t < tb + plan.artifact_burst_s + 3.0)
          near_burst = true;
      if (near_burst) continue;
      saccade_times.push_back(t);
      ++placed;
    }
    std::sort(saccade_times.begin(), saccade_times.end());
    constexpr double kTau = 0.004;
    double sign = 1.0;
    for (double t0 : saccade_times) {
      const double drift = detail::drift_at(out.truth.supra_times, profile, t0);
      const double amp = rng_eog.uniform(1.00, 1.15) *
                         detail::clamped_gain(profile.signs.saccade_amplitude,
                                              gains.saccade_amplitude, drift,
                                              0.82, 1.40);
      const double a = sign * amp;
      sign = -sign;
      const std::size_t i0 =
          std::size_t(std::max(0.0, (t0 - 0.05) * kEogRate));
      const std::size_t i1 = std::min<std::size_t>(
          n_eog, std::size_t((t0 + 0.05) * kEogRate));
      for (std::size_t i = i0; i < i1; ++i) {
        const double t = double(i) / kEogRate;
        const double v = a / (1.0 + std::exp(-(t - t0) / kTau));
        veog[i] += 0.75 * v;
        heog[i] += v;
      }
      for (std::size_t i = i1; i < n_eog; ++i) {
        veog[i] += 0.75 * a;
        heog[i] += a;
      }
      out.truth.saccades.push_back({t0, amp});
    }
  }

  // Blinks: Gaussian bumps in the vertical channel whose width shrinks with
  // drift. One probe blink is planted inside every artifact burst; organic
  // blinks that would straddle a burst edge are skipped.
  const auto add_blink = [&](double t0, bool masked) {
    const double drift = detail::drift_at(out.truth.supra_times, profile, t0);
    const double sigma = rng_eog.uniform(0.048, 0.062) *
                         detail::clamped_gain(profile.signs.blink_duration,
                                              gains.blink_duration, drift,
                                              0.65, 1.0);
    const double amp = rng_eog.uniform(0.60, 0.90);
    const std::size_t i0 =
        std::size_t(std::max(0.0, (t0 - 4.0 * sigma) * kEogRate));
    const std::size_t i1 = std::min<std::size_t>(
        n_eog, std::size_t((t0 + 4.0 * sigma) * kEogRate));
    for (std::size_t i = i0; i < i1; ++i) {
      const double t = double(i) / kEogRate - t0;
      veog[i] += amp * std::exp(-t * t / (2.0 * sigma * sigma));
    }
    out.truth.blinks.push_back(
        {t0, 2.0 * std::sqrt(2.0 * std::log(2.0)) * sigma * 1000.0, masked});
  };
  for (double tb : plan.artifact_burst_times)
    add_blink(tb + 0.5 * plan.artifact_burst_s, true);
  double t_blink = 30.0;
  while (true) {
    t_blink += rng_eog.uniform(2.5, 5.5);
    if (t_blink > plan.duration_s - 30.0) break;
    if (detail::near_any(saccade_times, t_blink, 0.6)) continue;
    bool skip = false;
    for (double tb : plan.artifact_burst_times) {
      const double lo = tb - 0.8;
      const double hi = tb + plan.artifact_burst_s + 0.8;
      if (t_blink > lo && t_blink < hi) skip = true;  // straddles the episode
    }
    if (skip) continue;
    add_blink(t_blink, false);
  }
  std::sort(out.truth.blinks.begin(), out.truth.blinks.end(),
            [](const TruthBlink& a, const TruthBlink& b) {
              return a.time_s < b.time_s;
            });

  out.veog.samples = std::move(veog);
  out.veog.sample_rate_hz = kEogRate;
  out.veog.start_time = 0.0;
  if (plan.dual_eog) {
    out.heog.samples = std::move(heog);
    out.heog.sample_rate_hz = kEogRate;
    out.heog.start_time = 0.0;
  }

  // --- Accelerometry --------------------------------------------------------
  Rng rng_acc(detail::mix_stream(plan.seed, 3));
  constexpr double kAccRate = 100.0;
  const std::size_t n_acc = std::size_t(plan.duration_s * kAccRate);
  out.accel.sample_rate_hz = kAccRate;
  out.accel.start_time = 0.0;
  for (auto& axis : out.accel.axes) axis.assign(n_acc, 0.0);
  constexpr double kQuietNoise = 0.002;
  for (std::size_t i = 0; i < n_acc; ++i) {
    out.accel.axes[0][i] = 9.81 + kQuietNoise * rng_acc.normal();
    out.accel.axes[1][i] = kQuietNoise * rng_acc.normal();
    out.accel.axes[2][i] = kQuietNoise * rng_acc.normal();
  }
  const double stride_hz = 1.0 / rng_acc.uniform(0.45, 0.60);
  for (const auto& w : plan.activity) {
    const std::size_t a0 = std::size_t(std::max(0.0, w.start_s) * kAccRate);
    const std::size_t a1 = std::min<std::size_t>(
        n_acc, std::size_t((w.start_s + w.duration_s) * kAccRate));
    if (w.gait) {
      // Stride harmonics on all three axes with a shared fine-structure
      // noise level; drift lowers that level, deflating the small
      // eigenvalues of the delay-embedding spectrum on every axis.
      for (std::size_t i = a0; i < a1; ++i) {
        const double t = double(i) / kAccRate;
        const double drift = detail::drift_at(out.truth.supra_times, profile, t);
        const double chaos =
            0.10 * detail::clamped_gain(profile.signs.gait_eigenvalue,
                                        gains.gait_noise, drift, 0.60, 1.0);
        const double phase = 2.0 * M_PI * stride_hz * (t - w.start_s);
        out.accel.axes[0][i] += 0.22 * std::sin(phase) +
                                0.12 * std::sin(2.0 * phase + 0.7) +
                                chaos * rng_acc.normal();
        out.accel.axes[1][i] +=
            0.15 * std::sin(phase + 1.1) + 0.8 * chaos * rng_acc.normal();
        out.accel.axes[2][i] += 0.10 * std::sin(2.0 * phase + 2.3) +
                                0.7 * chaos * rng_acc.normal();
      }
    } else {
      double ar = 0.0;
      for (std::size_t i = a0; i < a1; ++i) {
        const double t = double(i) / kAccRate;
        const double drift = detail::drift_at(out.truth.supra_times, profile, t);
        const double dither =
            0.020 * detail::clamped_gain(profile.signs.path_length,
                                         gains.path_length, drift, 1.0, 1.8);
        ar = 0.97 * ar + 0.0109 * rng_acc.normal();
        out.accel.axes[0][i] += ar + dither * rng_acc.normal();
      }
    }
  }
  return out;
}

// --- Cohort planning ---------------------------------------------------------

struct CohortConfig {
  std::uint64_t master_seed = 1;
  int n_subjects = 28;
  int base_sessions = 3;
  int extra_session_subjects = 7;  // the first N subjects get one extra
  double session_duration_s = 4000.0;
  double dual_eog_fraction = 0.40;
  bool couple = true;  // false: susceptibility 0 for everyone but the case
  double susceptibility_lo = 0.7;
  double susceptibility_hi = 1.3;
  int case_subject = -1;  // subject index, or -1 for no case study
  double case_susceptibility = 6.0;
  double case_threshold_db = 155.0;
  double case_onset_count = 12.0;
  int case_high_min = 14;
  int case_high_max = 20;
  double low_band_rate = 19.0;  // Poisson mean of 142-158 dB events
  int high_band_min = 1;        // every session sees at least this many
  int high_band_max = 24;       // uniform min..max events in 160.3-168 dB
  // The first high-band event lands within this fraction of the session.
  // The pre-event fraction of observations carries the floor label, and model
  // training needs that mass comfortably between the lowest percentile cut
  // and the minimum mixture occupancy, so the window is centered for both.
  double first_high_fraction = 0.18;
  double tail_prob = 0.15;      // chance of one 170.5-174 dB event
  int artifact_events = 2;
  int eog_artifact_bursts = 2;
};

struct PlannedSession {
  SubjectProfile profile;
  SessionPlan plan;
  int subject_index = 0;
  int session_index = 0;  // within subject
};

namespace detail {

// Keeps event levels away from the threshold grid so waveform round-trips
// cannot flip a count.
inline double nudge_level(double level) {
  for (double t : kDoseThresholdsDb) {
    if (std::abs(level - t) < 0.3) return level < t ? t - 0.31 : t + 0.31;
  }
  return level;
}

}  // namespace detail

inline std::string cohort_subject_id(int index) {
  std::string id = "S";
  if (index < 10) id += "0";
  id += std::to_string(index);
  return id;
}

// Deterministic cohort schedule: every session's randomness derives from
// (master seed, global session index) alone.
inline std::vector<PlannedSession> plan_cohort(const CohortConfig& cfg) {
  if (cfg.n_subjects < 3)
    throw std::invalid_argument("plan_cohort: need at least 3 subjects");
  std::vector<PlannedSession> out;
  int global_index = 0;
  for (int s = 0; s < cfg.n_subjects; ++s) {
    const bool is_case = s == cfg.case_subject;
    std::uint64_t subj_seed =
        detail::mix_stream(cfg.master_seed, 0x5afe + std::uint64_t(s));
    Rng subj_rng(subj_seed);
    SubjectProfile profile;
    profile.subject_id = cohort_subject_id(s);
    if (is_case) {
      profile.susceptibility = cfg.case_susceptibility;
      profile.coupling_threshold_db = cfg.case_threshold_db;
      profile.onset_count = cfg.case_onset_count;
    } else {
      profile.susceptibility =
          cfg.couple ? subj_rng.uniform(cfg.susceptibility_lo,
                                        cfg.susceptibility_hi)
                     : 0.0;
    }

    const int n_sessions =
        cfg.base_sessions + (s < cfg.extra_session_subjects ? 1 : 0);
    for (int j = 0; j < n_sessions; ++j, ++global_index) {
      SessionPlan plan;
      plan.session_id = profile.subject_id + "_R" + std::to_string(j);
      plan.duration_s = cfg.session_duration_s;
      plan.seed = detail::mix_stream(cfg.master_seed,
                                     0xbeef + std::uint64_t(global_index));
      Rng rng(detail::mix_stream(plan.seed, 7));
      plan.dual_eog = rng.uniform() < cfg.dual_eog_fraction;

      // Blast schedule: a low band, a high band, a rare loud tail, plus
      // injected artifact pseudo-events.
      std::vector<ScheduledEvent> events;
      const int n_low = rng.poisson(cfg.low_band_rate);
      for (int e = 0; e < n_low; ++e) {
        ScheduledEvent ev;
        ev.time_s = rng.uniform(20.0, plan.duration_s - 20.0);
        ev.level_db = detail::nudge_level(rng.uniform(142.0, 158.0));
        ev.duration_ms = rng.uniform(1.2, 2.5);
        events.push_back(ev);
      }
      const int n_high = is_case
                             ? rng.uniform_int(cfg.case_high_min, cfg.case_high_max)
                             : rng.uniform_int(cfg.high_band_min, cfg.high_band_max);
      for (int e = 0; e < n_high; ++e) {
        ScheduledEvent ev;
        ev.time_s = e == 0 ? rng.uniform(20.0, cfg.first_high_fraction *
                                                   plan.duration_s)
                           : rng.uniform(20.0, plan.duration_s - 20.0);
        ev.level_db = detail::nudge_level(rng.uniform(160.31, 168.0));
        ev.duration_ms = rng.uniform(1.2, 2.5);
        events.push_back(ev);
      }
      if (rng.uniform() < cfg.tail_prob) {
        ScheduledEvent ev;
        ev.time_s = rng.uniform(20.0, plan.duration_s - 20.0);
        ev.level_db = detail::nudge_level(rng.uniform(170.5, 174.0));
        ev.duration_ms = rng.uniform(1.2, 2.5);
        events.push_back(ev);
      }
      for (int e = 0; e < cfg.artifact_events; ++e) {
        ScheduledEvent ev;
        ev.time_s = rng.uniform(20.0, plan.duration_s - 20.0);
        ev.level_db = rng.uniform(150.0, 160.0);
        ev.artifact = true;
        events.push_back(ev);
      }
      std::sort(events.begin(), events.end(),
                [](const ScheduledEvent& a, const ScheduledEvent& b) {
                  return a.time_s < b.time_s;
                });
      plan.events = std::move(events);

      // Alternating gait / low-movement bouts separated by quiet gaps,
      // spanning the whole session so inclusion windows are satisfied.
      double t = 25.0;
      bool gait = true;
      while (t + 45.0 < plan.duration_s - 25.0) {
        ActivityWindow w;
        w.start_s = t;
        w.duration_s =
            std::min(rng.uniform(65.0, 75.0), plan.duration_s - 25.0 - t);
        w.gait = gait;
        plan.activity.push_back(w);
        t += w.duration_s + rng.uniform(35.0, 45.0);
        gait = !gait;
      }

      for (int b = 0; b < cfg.eog_artifact_bursts; ++b)
        plan.artifact_burst_times.push_back(
            rng.uniform(0.12, 0.85) * plan.duration_s +
            double(b) * 0.05 * plan.duration_s);
      std::sort(plan.artifact_burst_times.begin(),
                plan.artifact_burst_times.end());

      PlannedSession ps;
      ps.profile = profile;
      ps.plan = std::move(plan);
      ps.subject_index = s;
      ps.session_index = j;
      out.push_back(std::move(ps));
    }
  }
  return out;
}

// Monthly reaction-time series per subject; designated subjects carry a
// slow upward drift that the trend test must flag.
struct ReactionSeries {
  std::string subject_id;
  std::vector<double> days;
  std::vector<double> reaction_ms;
  bool drifting = false;
};

inline std::vector<ReactionSeries> gen_anam(const CohortConfig& cfg,
                                            const std::vector<int>& drifting) {
  std::vector<ReactionSeries> out;
  for (int s = 0; s < cfg.n_subjects; ++s) {
    Rng rng(detail::mix_stream(cfg.master_seed, 0xa7a3 + std::uint64_t(s)));
    ReactionSeries r;
    r.subject_id = cohort_subject_id(s);
    r.drifting =
        std::find(drifting.begin(), drifting.end(), s) != drifting.end();
    const double base = rng.uniform(230.0, 280.0);
    for (int m = 0; m < 36; ++m) {
      const double day = 30.4 * double(m);
      r.days.push_back(day);
      r.reaction_ms.push_back(base + (r.drifting ? 0.03 * day : 0.0) +
                              rng.normal(0.0, 2.0));
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace blastdose
