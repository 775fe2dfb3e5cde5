#pragma once
// Overpressure event metrics, two-microphone artifact rejection, and
// accumulating / total dose measures at configurable level thresholds.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "blastdose/signal.hpp"

namespace blastdose {

inline constexpr double kPaPerPsi = 6894.757;
inline constexpr double kRefPressurePa = 20e-6;
inline constexpr double kEightHoursS = 28800.0;
inline constexpr std::array<double, 7> kDoseThresholdsDb = {140, 145, 150, 155,
                                                            160, 165, 170};

inline double pa_to_dbspl(double p) {
  if (!(p > 0.0)) throw std::invalid_argument("pa_to_dbspl: pressure <= 0");
  return 20.0 * std::log10(p / kRefPressurePa);
}
inline double dbspl_to_pa(double level) {
  return kRefPressurePa * std::pow(10.0, level / 20.0);
}
inline double pa_to_psi(double p) { return p / kPaPerPsi; }
inline double psi_to_pa(double p) { return p * kPaPerPsi; }
inline double dbspl_to_psi(double level) { return pa_to_psi(dbspl_to_pa(level)); }

enum class DoseMetric { BlastCount, CumPeakPressure, TotalPositiveImpulse, LZeq8hr };

inline const char* dose_metric_name(DoseMetric m) {
  switch (m) {
    case DoseMetric::BlastCount: return "BlastCount";
    case DoseMetric::CumPeakPressure: return "CumPeakPressure";
    case DoseMetric::TotalPositiveImpulse: return "TotalPositiveImpulse";
    case DoseMetric::LZeq8hr: return "LZeq8hr";
  }
  throw std::logic_error("unknown metric");
}
inline constexpr std::array<DoseMetric, 4> kAllDoseMetrics = {
    DoseMetric::BlastCount, DoseMetric::CumPeakPressure,
    DoseMetric::TotalPositiveImpulse, DoseMetric::LZeq8hr};

// Raw two-microphone recording of one triggered event, both channels in Pa.
struct BlastEvent {
  double event_time = 0.0;  // epoch seconds
  SampledSignal low_gain_channel;
  SampledSignal high_gain_channel;
};

struct EventMetrics {
  double event_time = 0.0;
  double peak_pressure_psi = 0.0;
  double peak_level_db_spl = -std::numeric_limits<double>::infinity();
  double positive_impulse_psi_ms = 0.0;
  double energy_pa2_s = 0.0;  // integral of p^2 over the selected waveform
  bool is_artifact = false;
  double artifact_score = 0.0;
};

// Background acoustic energy reported by the logger between events.
struct ContinuousLevel {
  double time = 0.0;  // epoch seconds
  double level_db_spl = 0.0;
  double duration_s = 0.0;

  double energy_pa2_s() const {
    const double p = dbspl_to_pa(level_db_spl);
    return p * p * duration_s;
  }
};

struct DoseSeries {
  DoseMetric kind = DoseMetric::BlastCount;
  double threshold_db_spl = 0.0;
  std::vector<double> timestamps;
  std::vector<double> cumulative_values;
};

struct SessionDose {
  std::string session_id;
  std::string subject_id;
  // totals[metric][threshold] in the kAllDoseMetrics / kDoseThresholdsDb order.
  std::array<std::array<double, 7>, 4> totals{};
  int artifact_count = 0;
  bool discarded = false;
};

struct DoseConfig {
  double full_scale_pa_high = 3556.6;   // high-gain rail, about 165 dB SPL
  double full_scale_pa_low = 35565.6;   // low-gain rail, about 185 dB SPL
  double clip_fraction = 0.95;          // near-rail samples mean clipping
  double artifact_correlation_min = 0.7;
  double artifact_max_lag_s = 1e-3;
  int max_artifacts_per_session = 20;
};

namespace detail {

inline void check_event_channels(const BlastEvent& e) {
  const auto& lo = e.low_gain_channel;
  const auto& hi = e.high_gain_channel;
  if (lo.samples.empty() || hi.samples.empty())
    throw std::invalid_argument("event: empty channel");
  if (lo.samples.size() != hi.samples.size() ||
      lo.sample_rate_hz != hi.sample_rate_hz)
    throw std::invalid_argument("event: channel shape mismatch");
  if (!(lo.sample_rate_hz >= 8000.0))
    throw std::invalid_argument("event: sample rate below 8 kHz");
}

}  // namespace detail

// The high-gain microphone is preferred for its resolution; near-rail samples
// indicate clipping, in which case the low-gain channel carries the event.
inline const SampledSignal& select_channel(const BlastEvent& e,
                                           const DoseConfig& cfg) {
  detail::check_event_channels(e);
  const double rail = cfg.clip_fraction * cfg.full_scale_pa_high;
  for (double v : e.high_gain_channel.samples)
    if (std::abs(v) > rail) return e.low_gain_channel;
  return e.high_gain_channel;
}

// Integral of the contiguous positive phase containing the global peak, in
// Pa*s: trapezoids across positive samples plus interpolated edge triangles.
inline double positive_impulse_pa_s(const SampledSignal& s) {
  const auto& x = s.samples;
  const long n = long(x.size());
  if (n == 0) return 0.0;
  long peak = 0;
  for (long i = 1; i < n; ++i)
    if (x[std::size_t(i)] > x[std::size_t(peak)]) peak = i;
  if (!(x[std::size_t(peak)] > 0.0)) return 0.0;
  long a = peak;
  while (a > 0 && x[std::size_t(a - 1)] > 0.0) --a;
  long b = peak;
  while (b + 1 < n && x[std::size_t(b + 1)] > 0.0) ++b;
  const double dt = 1.0 / s.sample_rate_hz;
  double area = 0.0;
  for (long i = a; i < b; ++i)
    area += 0.5 * (x[std::size_t(i)] + x[std::size_t(i + 1)]) * dt;
  if (a > 0) {
    const double frac =
        x[std::size_t(a)] / (x[std::size_t(a)] - x[std::size_t(a - 1)]);
    area += 0.5 * x[std::size_t(a)] * frac * dt;
  }
  if (b + 1 < n) {
    const double frac =
        x[std::size_t(b)] / (x[std::size_t(b)] - x[std::size_t(b + 1)]);
    area += 0.5 * x[std::size_t(b)] * frac * dt;
  }
  return area;
}

// Consistency between the two microphones: maximum normalized
// cross-correlation over lags within +-max_lag, after scaling each channel to
// unit energy (gain-invariant). Zero-energy channels score 0.
inline double artifact_score(const BlastEvent& e, const DoseConfig& cfg) {
  detail::check_event_channels(e);
  const auto& a = e.low_gain_channel.samples;
  const auto& b = e.high_gain_channel.samples;
  const long n = long(a.size());
  double ea = 0.0, eb = 0.0;
  for (long i = 0; i < n; ++i) {
    ea += a[std::size_t(i)] * a[std::size_t(i)];
    eb += b[std::size_t(i)] * b[std::size_t(i)];
  }
  if (!(ea > 0.0) || !(eb > 0.0)) return 0.0;
  const double norm = 1.0 / std::sqrt(ea * eb);
  const long max_lag = std::lround(cfg.artifact_max_lag_s *
                                   e.low_gain_channel.sample_rate_hz);
  double best = -1.0;
  for (long lag = -max_lag; lag <= max_lag; ++lag) {
    double s = 0.0;
    const long i0 = std::max<long>(0, -lag);
    const long i1 = std::min<long>(n, n - lag);
    for (long i = i0; i < i1; ++i)
      s += a[std::size_t(i)] * b[std::size_t(i + lag)];
    best = std::max(best, s * norm);
  }
  return best;
}

// Per-event metrics from the selected channel plus the two-channel
// consistency check. An all-negative waveform yields zero peak and impulse.
inline EventMetrics event_metrics(const BlastEvent& e, const DoseConfig& cfg) {
  const SampledSignal& ch = select_channel(e, cfg);
  EventMetrics m;
  m.event_time = e.event_time;
  double peak_pa = 0.0;
  double energy = 0.0;
  const double dt = 1.0 / ch.sample_rate_hz;
  for (std::size_t i = 0; i < ch.samples.size(); ++i) {
    peak_pa = std::max(peak_pa, ch.samples[i]);
    const double sq = ch.samples[i] * ch.samples[i];
    // Trapezoid: half weight on the first and last samples.
    const bool edge = (i == 0 || i + 1 == ch.samples.size());
    energy += (edge ? 0.5 : 1.0) * sq * dt;
  }
  m.peak_pressure_psi = pa_to_psi(peak_pa);
  m.peak_level_db_spl = peak_pa > 0.0
                            ? pa_to_dbspl(peak_pa)
                            : -std::numeric_limits<double>::infinity();
  m.positive_impulse_psi_ms = pa_to_psi(positive_impulse_pa_s(ch)) * 1000.0;
  m.energy_pa2_s = energy;
  m.artifact_score = artifact_score(e, cfg);
  m.is_artifact = m.artifact_score < cfg.artifact_correlation_min;
  return m;
}

// Accumulating dose series: one point per event (in input order), events below
// the level threshold contributing nothing. Continuous background energy
// (LZeq-style logger records) affects only the LZeq8hr metric.
inline DoseSeries accumulate_dose(const std::vector<EventMetrics>& events,
                                  const std::vector<ContinuousLevel>& continuous,
                                  DoseMetric kind, double threshold_db) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].is_artifact)
      throw std::invalid_argument("accumulate_dose: artifact not excluded");
    if (i > 0 && events[i].event_time < events[i - 1].event_time)
      throw std::invalid_argument("accumulate_dose: events not time-sorted");
  }
  for (std::size_t i = 1; i < continuous.size(); ++i)
    if (continuous[i].time < continuous[i - 1].time)
      throw std::invalid_argument("accumulate_dose: levels not time-sorted");

  DoseSeries out;
  out.kind = kind;
  out.threshold_db_spl = threshold_db;
  out.timestamps.reserve(events.size());
  out.cumulative_values.reserve(events.size());

  double acc = 0.0;       // count / psi / psi*ms depending on kind
  double energy = 0.0;    // Pa^2*s for LZeq8hr
  std::size_t next_cont = 0;
  const double denom = kRefPressurePa * kRefPressurePa * kEightHoursS;
  for (const EventMetrics& ev : events) {
    while (next_cont < continuous.size() &&
           continuous[next_cont].time <= ev.event_time) {
      energy += continuous[next_cont].energy_pa2_s();
      ++next_cont;
    }
    const bool qualifies = ev.peak_level_db_spl >= threshold_db;
    if (qualifies) {
      switch (kind) {
        case DoseMetric::BlastCount: acc += 1.0; break;
        case DoseMetric::CumPeakPressure: acc += ev.peak_pressure_psi; break;
        case DoseMetric::TotalPositiveImpulse:
          acc += ev.positive_impulse_psi_ms;
          break;
        case DoseMetric::LZeq8hr: break;
      }
      energy += ev.energy_pa2_s;
    }
    out.timestamps.push_back(ev.event_time);
    if (kind == DoseMetric::LZeq8hr) {
      out.cumulative_values.push_back(
          energy > 0.0 ? 10.0 * std::log10(energy / denom)
                       : -std::numeric_limits<double>::infinity());
    } else {
      out.cumulative_values.push_back(acc);
    }
  }
  return out;
}

// Session totals across all metric/threshold combinations. Artifacts are
// excluded from dose but counted; more than the configured limit discards the
// session.
inline SessionDose session_summary(const std::string& session_id,
                                   const std::string& subject_id,
                                   const std::vector<EventMetrics>& all_events,
                                   const std::vector<ContinuousLevel>& continuous,
                                   const DoseConfig& cfg) {
  SessionDose out;
  out.session_id = session_id;
  out.subject_id = subject_id;
  std::vector<EventMetrics> clean;
  clean.reserve(all_events.size());
  for (const EventMetrics& ev : all_events) {
    if (ev.is_artifact) {
      ++out.artifact_count;
    } else {
      clean.push_back(ev);
    }
  }
  out.discarded = out.artifact_count > cfg.max_artifacts_per_session;

  double cont_energy = 0.0;
  for (const ContinuousLevel& c : continuous) cont_energy += c.energy_pa2_s();
  const double denom = kRefPressurePa * kRefPressurePa * kEightHoursS;

  for (std::size_t mi = 0; mi < kAllDoseMetrics.size(); ++mi) {
    for (std::size_t ti = 0; ti < kDoseThresholdsDb.size(); ++ti) {
      const double threshold = kDoseThresholdsDb[ti];
      double acc = 0.0, energy = cont_energy;
      for (const EventMetrics& ev : clean) {
        if (!(ev.peak_level_db_spl >= threshold)) continue;
        switch (kAllDoseMetrics[mi]) {
          case DoseMetric::BlastCount: acc += 1.0; break;
          case DoseMetric::CumPeakPressure: acc += ev.peak_pressure_psi; break;
          case DoseMetric::TotalPositiveImpulse:
            acc += ev.positive_impulse_psi_ms;
            break;
          case DoseMetric::LZeq8hr: break;
        }
        energy += ev.energy_pa2_s;
      }
      if (kAllDoseMetrics[mi] == DoseMetric::LZeq8hr) {
        out.totals[mi][ti] =
            energy > 0.0 ? 10.0 * std::log10(energy / denom)
                         : -std::numeric_limits<double>::infinity();
      } else {
        out.totals[mi][ti] = acc;
      }
    }
  }
  return out;
}

}  // namespace blastdose
