#pragma once
// Blink and saccade detection from 500 Hz electrooculography with
// power-based artifact masking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "blastdose/signal.hpp"
#include "blastdose/stats.hpp"

namespace blastdose {

struct BlinkEvent {
  double peak_time = 0.0;  // epoch seconds
  double duration_ms = 0.0;
};

struct SaccadeEvent {
  double onset_time = 0.0;  // epoch seconds
  double amplitude = 0.0;   // filtered-EOG units
  double vh_correlation = 0.0;
};

struct EogConfig {
  // Artifact masking.
  double power_smooth_s = 0.25;
  double median_window_s = 300.0;
  double power_ratio = 2.5;
  double power_min_duration_s = 1.0;
  // Blink detection.
  int cwt_scale = 80;
  double pair_span_s = 0.2;       // matched pos+neg pair must span this, so
                                  // each lobe is >= half of it at half prom
  double pair_max_separation_s = 0.2;
  double percentile = 95.0;
  double percentile_block_s = 300.0;
  double duration_search_s = 0.25;
  double max_duration_ms = 2000.0;
  // Saccade detection.
  double saccade_smooth_s = 0.05;
  double saccade_refractory_s = 0.1;
  double saccade_snap_s = 0.025;
  double saccade_window_s = 0.1;  // centered on the velocity peak
  double saccade_amp_factor = 0.25;
  double saccade_corr_min = 0.6;
};

// Marks sustained high-power stretches as artifacts. "Power" is the squared
// first difference (velocity power) smoothed over power_smooth_s, so slow
// physiological deflections (blinks, the settled tail of a gaze step) do not
// linger in the statistic; a stretch is masked when that power exceeds
// power_ratio times its 5-minute moving median continuously for at least
// power_min_duration_s. Electrode pops and motion bursts last seconds and are
// caught; blinks and saccades produce sub-second excursions and pass through.
// Signals shorter than 1 s are returned unmasked; an all-zero signal stays
// unmasked because 0 > 2.5 * 0 is false.
inline std::vector<bool> artifact_mask(const SampledSignal& eog,
                                       const EogConfig& cfg = {}) {
  const std::size_t n = eog.samples.size();
  std::vector<bool> mask(n, false);
  if (double(n) < eog.sample_rate_hz) return mask;
  std::vector<double> vel_sq(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double d = eog.samples[i] - eog.samples[i - 1];
    vel_sq[i] = d * d;
  }
  const int w =
      std::max(1, int(std::lround(cfg.power_smooth_s * eog.sample_rate_hz)));
  SampledSignal power;
  power.samples = moving_average(vel_sq, w);
  power.sample_rate_hz = eog.sample_rate_hz;
  power.start_time = eog.start_time;
  const SampledSignal med = moving_median(power, cfg.median_window_s);
  const std::size_t min_run = std::max<std::size_t>(
      1, std::size_t(std::lround(cfg.power_min_duration_s * eog.sample_rate_hz)));
  std::size_t run_begin = 0;
  bool in_run = false;
  for (std::size_t i = 0; i <= n; ++i) {
    const bool hot =
        i < n && power.samples[i] > cfg.power_ratio * med.samples[i];
    if (hot && !in_run) {
      in_run = true;
      run_begin = i;
    } else if (!hot && in_run) {
      in_run = false;
      if (i - run_begin >= min_run)
        std::fill(mask.begin() + run_begin, mask.begin() + i, true);
    }
  }
  return mask;
}

namespace detail {

struct SignedPeak {
  int index;
  int sign;  // +1 or -1
};

// Coefficient peaks in one direction, gated by the per-block 95th percentile
// of same-sign coefficient magnitudes. Blocks with no same-sign coefficients
// contribute no peaks.
inline std::vector<SignedPeak> directional_peaks(const std::vector<double>& c,
                                                 int sign, double rate,
                                                 const EogConfig& cfg) {
  const std::size_t n = c.size();
  const std::size_t block =
      std::max<std::size_t>(1, std::size_t(cfg.percentile_block_s * rate));
  const std::size_t n_blocks = (n + block - 1) / block;
  std::vector<double> thr(n_blocks, std::numeric_limits<double>::infinity());
  double min_thr = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < n_blocks; ++b) {
    std::vector<double> mags;
    const std::size_t end = std::min(n, (b + 1) * block);
    for (std::size_t i = b * block; i < end; ++i) {
      const double v = sign > 0 ? c[i] : -c[i];
      if (v > 0.0) mags.push_back(v);
    }
    if (mags.empty()) continue;
    thr[b] = percentile_linear(std::move(mags), cfg.percentile);
    min_thr = std::min(min_thr, thr[b]);
  }
  std::vector<SignedPeak> out;
  if (!std::isfinite(min_thr)) return out;

  std::vector<double> flipped;
  const std::vector<double>* series = &c;
  if (sign < 0) {
    flipped.resize(n);
    for (std::size_t i = 0; i < n; ++i) flipped[i] = -c[i];
    series = &flipped;
  }
  const int min_width =
      std::max(1, int(std::lround(0.5 * cfg.pair_span_s * rate)));
  const PeakList peaks = find_peaks(*series, min_width, min_thr, 0.0);
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    const std::size_t b = std::size_t(peaks.indices[k]) / block;
    if (peaks.heights[k] >= thr[b]) out.push_back({peaks.indices[k], sign});
  }
  return out;
}

}  // namespace detail

// Blink detection. `narrow` is the 0.1-10 Hz bandpassed vertical EOG on which
// the wavelet transform runs; `wide` is the 0.1-25 Hz bandpassed original on
// which the duration is measured; `mask` aligns with both.
//
// A blink is a matched pair of adjacent opposite-sign wavelet peaks closer
// than the pairing limit (a bump produces a positive lobe followed by a
// negative one, an inverted bump the reverse; both polarities pair). Duration
// is the width of the wide-band deflection at half its extremum. Blinks whose
// lobe span or half-height interval touches a masked sample are dropped.
inline std::vector<BlinkEvent> detect_blinks(const SampledSignal& narrow,
                                             const SampledSignal& wide,
                                             const std::vector<bool>& mask,
                                             const EogConfig& cfg = {}) {
  const std::size_t n = narrow.samples.size();
  if (wide.samples.size() != n || mask.size() != n)
    throw std::invalid_argument("detect_blinks: input length mismatch");
  if (wide.sample_rate_hz != narrow.sample_rate_hz)
    throw std::invalid_argument("detect_blinks: rate mismatch");
  std::vector<BlinkEvent> out;
  if (n < std::size_t(2 * cfg.cwt_scale)) return out;
  const double rate = narrow.sample_rate_hz;

  const std::vector<double> c = cwt_haar(narrow, cfg.cwt_scale);
  auto pos = detail::directional_peaks(c, +1, rate, cfg);
  auto neg = detail::directional_peaks(c, -1, rate, cfg);
  std::vector<detail::SignedPeak> all;
  all.reserve(pos.size() + neg.size());
  all.insert(all.end(), pos.begin(), pos.end());
  all.insert(all.end(), neg.begin(), neg.end());
  std::sort(all.begin(), all.end(),
            [](const detail::SignedPeak& a, const detail::SignedPeak& b) {
              return a.index < b.index;
            });

  const long search = std::lround(cfg.duration_search_s * rate);
  for (std::size_t i = 0; i + 1 < all.size();) {
    const auto& a = all[i];
    const auto& b = all[i + 1];
    if (a.sign == b.sign ||
        double(b.index - a.index) / rate >= cfg.pair_max_separation_s) {
      ++i;
      continue;
    }
    i += 2;
    const long mid2 = a.index + b.index;  // 2 * midpoint
    const long center = mid2 / 2;

    // Local extremum of the wide-band signal near the pair midpoint.
    const long lo = std::max<long>(0, center - search);
    const long hi = std::min<long>(long(n) - 1, center + search);
    long ext = lo;
    for (long j = lo; j <= hi; ++j)
      if (std::abs(wide.samples[std::size_t(j)]) >
          std::abs(wide.samples[std::size_t(ext)]))
        ext = j;
    const double amp = wide.samples[std::size_t(ext)];
    if (amp == 0.0) continue;
    const double half = amp / 2.0;
    // Walk outward while the deflection stays beyond half amplitude.
    auto beyond = [&](long j) {
      const double v = wide.samples[std::size_t(j)];
      return amp > 0.0 ? v > half : v < half;
    };
    long l = ext;
    while (l > 0 && beyond(l - 1)) --l;
    long r = ext;
    while (r + 1 < long(n) && beyond(r + 1)) ++r;
    if (l == 0 || r == long(n) - 1) continue;  // runs off the record
    const double vl0 = wide.samples[std::size_t(l - 1)];
    const double vl1 = wide.samples[std::size_t(l)];
    const double left_pos = double(l) - (vl1 - half) / (vl1 - vl0);
    const double vr0 = wide.samples[std::size_t(r)];
    const double vr1 = wide.samples[std::size_t(r + 1)];
    const double right_pos = double(r) + (vr0 - half) / (vr0 - vr1);
    const double duration_ms = (right_pos - left_pos) / rate * 1000.0;
    if (!(duration_ms > 0.0) || duration_ms >= cfg.max_duration_ms) continue;

    // Exclusion interval: wavelet pair span united with the duration span.
    const long m0 = std::min<long>(a.index, long(std::floor(left_pos)));
    const long m1 = std::max<long>(b.index, long(std::ceil(right_pos)));
    bool masked = false;
    for (long j = std::max<long>(0, m0);
         j <= std::min<long>(long(n) - 1, m1) && !masked; ++j)
      masked = mask[std::size_t(j)];
    if (masked) continue;

    BlinkEvent ev;
    ev.peak_time = narrow.start_time + 0.5 * double(mid2) / rate;
    ev.duration_ms = duration_ms;
    out.push_back(ev);
  }
  return out;
}

// Saccade detection from matched vertical and horizontal channels, both
// bandpassed 0.1-10 Hz. Candidates are sample-to-sample changes beyond the
// channel's global standard deviation (with a refractory period); each is
// snapped to the nearby velocity maximum of the 50 ms smoothed horizontal
// channel, then gated on amplitude and vertical/horizontal correlation over a
// 100 ms window centered there. Windows touching either mask are dropped.
inline std::vector<SaccadeEvent> detect_saccades(const SampledSignal& veog,
                                                 const SampledSignal& heog,
                                                 const std::vector<bool>& vmask,
                                                 const std::vector<bool>& hmask,
                                                 const EogConfig& cfg = {}) {
  const std::size_t n = heog.samples.size();
  if (veog.samples.size() != n || vmask.size() != n || hmask.size() != n ||
      veog.sample_rate_hz != heog.sample_rate_hz ||
      std::abs(veog.start_time - heog.start_time) > 1e-9)
    throw std::invalid_argument("detect_saccades: time ranges differ");
  std::vector<SaccadeEvent> out;
  if (n < 3) return out;
  const double rate = heog.sample_rate_hz;
  const auto& h = heog.samples;

  double mean = 0.0;
  for (double v : h) mean += v;
  mean /= double(n);
  double var = 0.0;
  for (double v : h) var += (v - mean) * (v - mean);
  const double gstd = std::sqrt(var / double(n));
  if (!(gstd > 0.0)) return out;

  const int w_smooth =
      std::max(1, int(std::lround(cfg.saccade_smooth_s * rate)));
  const std::vector<double> smooth = moving_average(h, w_smooth);
  std::vector<double> vel(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    vel[i] = std::abs(smooth[i] - smooth[i - 1]);

  const long refractory = std::lround(cfg.saccade_refractory_s * rate);
  const long snap = std::lround(cfg.saccade_snap_s * rate);
  const long half = std::lround(0.5 * cfg.saccade_window_s * rate);
  long last_candidate = std::numeric_limits<long>::min() / 2;
  long last_emit = std::numeric_limits<long>::min() / 2;
  for (long i = 1; i < long(n); ++i) {
    if (std::abs(h[std::size_t(i)] - h[std::size_t(i - 1)]) <= gstd) continue;
    if (i - last_candidate < refractory) continue;
    last_candidate = i;

    long t = std::max<long>(1, i - snap);
    for (long j = t; j <= std::min<long>(long(n) - 1, i + snap); ++j)
      if (vel[std::size_t(j)] > vel[std::size_t(t)]) t = j;
    const long a = t - half;
    const long b = t + half;
    if (a < 0 || b >= long(n)) continue;
    if (t == last_emit) continue;

    const double amplitude =
        std::abs(h[std::size_t(b)] - h[std::size_t(a)]);
    if (amplitude < cfg.saccade_amp_factor * gstd) continue;

    std::vector<double> vw, hw;
    vw.reserve(std::size_t(b - a + 1));
    hw.reserve(std::size_t(b - a + 1));
    bool masked = false;
    for (long j = a; j <= b; ++j) {
      masked = masked || vmask[std::size_t(j)] || hmask[std::size_t(j)];
      vw.push_back(veog.samples[std::size_t(j)]);
      hw.push_back(h[std::size_t(j)]);
    }
    if (masked) continue;
    double corr;
    try {
      corr = pearson(vw, hw);
    } catch (const std::invalid_argument&) {
      continue;  // degenerate window cannot establish correlation
    }
    if (!(corr > cfg.saccade_corr_min)) continue;

    SaccadeEvent ev;
    ev.onset_time = heog.start_time + double(t) / rate;
    ev.amplitude = amplitude;
    ev.vh_correlation = corr;
    out.push_back(ev);
    last_emit = t;
  }
  return out;
}

}  // namespace blastdose
