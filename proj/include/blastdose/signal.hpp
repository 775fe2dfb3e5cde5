#pragma once
// Shared signal primitives: sampled series, zero-phase Butterworth band-pass,
// moving statistics, Haar wavelet transform, peak finding, autocorrelation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

namespace blastdose {

// Uniformly sampled series. Sample i occurs at start_time + i / sample_rate_hz.
struct SampledSignal {
  std::vector<double> samples;
  double sample_rate_hz = 0.0;
  double start_time = 0.0;  // epoch seconds

  std::size_t size() const { return samples.size(); }
  double time_at(std::size_t i) const {
    return start_time + double(i) / sample_rate_hz;
  }
};

namespace detail {

// One second-order section, denominator normalized (a0 = 1).
struct Biquad {
  double b0, b1, b2, a1, a2;
};

// Butterworth band-pass as cascaded biquads via the analog prototype,
// band transform, and bilinear transform. `order` is the prototype order;
// the band-pass has 2*order poles (order biquads).
inline std::vector<Biquad> butter_bandpass_sos(int order, double lo_hz,
                                               double hi_hz, double rate_hz) {
  using cd = std::complex<double>;
  const double pi = 3.14159265358979323846264338328;
  const double fs2 = 2.0 * rate_hz;
  // Pre-warped analog band edges.
  const double wlo = fs2 * std::tan(pi * lo_hz / rate_hz);
  const double whi = fs2 * std::tan(pi * hi_hz / rate_hz);
  const double bw = whi - wlo;
  const double w0sq = whi * wlo;

  // Low-pass prototype poles on the unit circle (left half-plane),
  // then each maps to a pair of band-pass poles.
  std::vector<cd> poles;
  poles.reserve(2 * order);
  for (int k = 0; k < order; ++k) {
    const double theta = pi * double(2 * k + order + 1) / double(2 * order);
    const cd p(std::cos(theta), std::sin(theta));
    const cd bp = 0.5 * bw * p;
    const cd rad = std::sqrt(bp * bp - cd(w0sq, 0.0));
    poles.push_back(bp + rad);
    poles.push_back(bp - rad);
  }

  // Bilinear transform. Analog zeros: `order` at s = 0 (-> z = 1) plus
  // `order` at infinity (-> z = -1). Gain follows from the substitution.
  cd denom(1.0, 0.0);
  std::vector<cd> zpoles;
  zpoles.reserve(poles.size());
  for (const cd& p : poles) {
    zpoles.push_back((cd(fs2, 0.0) + p) / (cd(fs2, 0.0) - p));
    denom *= cd(fs2, 0.0) - p;
  }
  const double gain = (std::pow(bw * fs2, order) / denom).real();

  // Pair poles into conjugate (or real) biquads; each biquad takes one zero
  // at +1 and one at -1, i.e. numerator z^2 - 1.
  std::vector<Biquad> sos;
  sos.reserve(order);
  std::vector<bool> used(zpoles.size(), false);
  for (std::size_t i = 0; i < zpoles.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    cd p1 = zpoles[i];
    cd p2;
    if (std::abs(p1.imag()) > 1e-12) {
      // Find the conjugate partner.
      std::size_t match = i;
      double best = 1e300;
      for (std::size_t j = i + 1; j < zpoles.size(); ++j) {
        if (used[j]) continue;
        double d = std::abs(zpoles[j] - std::conj(p1));
        if (d < best) {
          best = d;
          match = j;
        }
      }
      used[match] = true;
      p2 = std::conj(p1);
    } else {
      // Pair with the next unused real pole.
      std::size_t match = zpoles.size();
      for (std::size_t j = i + 1; j < zpoles.size(); ++j) {
        if (!used[j] && std::abs(zpoles[j].imag()) <= 1e-12) {
          match = j;
          break;
        }
      }
      if (match == zpoles.size()) throw std::logic_error("unpaired real pole");
      used[match] = true;
      p2 = zpoles[match];
    }
    Biquad q;
    q.b0 = 1.0;
    q.b1 = 0.0;
    q.b2 = -1.0;
    q.a1 = -(p1 + p2).real();
    q.a2 = (p1 * p2).real();
    sos.push_back(q);
  }
  // Fold the overall gain into the first section.
  sos.front().b0 *= gain;
  sos.front().b1 *= gain;
  sos.front().b2 *= gain;
  return sos;
}

// Run one section (transposed direct form II) with the given initial state.
inline void biquad_run(const Biquad& q, std::vector<double>& x, double s1,
                       double s2) {
  for (double& v : x) {
    const double in = v;
    const double out = q.b0 * in + s1;
    s1 = q.b1 * in - q.a1 * out + s2;
    s2 = q.b2 * in - q.a2 * out;
    v = out;
  }
}

// Cascade filter with step-response steady-state initialization scaled to the
// first sample, which suppresses start-up transients on offset signals.
inline void sosfilt_ss(const std::vector<Biquad>& sos, std::vector<double>& x) {
  if (x.empty()) return;
  double level = x.front();
  for (const Biquad& q : sos) {
    const double hdc = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    const double y0 = hdc * level;
    const double s1 = y0 - q.b0 * level;
    const double s2 = q.b2 * level - q.a2 * y0;
    biquad_run(q, x, s1, s2);
    level = y0;
  }
}

}  // namespace detail

// Zero-phase Butterworth band-pass: the design response is applied forward and
// backward (squared magnitude, no phase shift). Start-up transients are
// reduced with odd-reflection padding sized to the low cutoff.
inline SampledSignal bandpass(const SampledSignal& signal, double lo_hz,
                              double hi_hz, int order) {
  if (!(lo_hz > 0.0) || !(hi_hz > lo_hz) ||
      !(hi_hz < signal.sample_rate_hz / 2.0)) {
    throw std::invalid_argument("bandpass: invalid band edges");
  }
  if (order < 1) throw std::invalid_argument("bandpass: order must be >= 1");
  SampledSignal out = signal;
  const std::size_t n = signal.samples.size();
  if (n < 2) {
    for (double& v : out.samples) v = 0.0;
    return out;
  }
  const auto sos =
      detail::butter_bandpass_sos(order, lo_hz, hi_hz, signal.sample_rate_hz);

  const std::size_t pad = std::min<std::size_t>(
      n - 1, std::size_t(std::ceil(3.0 / lo_hz * signal.sample_rate_hz)));
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  const auto& x = signal.samples;
  for (std::size_t i = 0; i < pad; ++i)
    ext.push_back(2.0 * x.front() - x[pad - i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 0; i < pad; ++i)
    ext.push_back(2.0 * x.back() - x[n - 2 - i]);

  detail::sosfilt_ss(sos, ext);
  std::reverse(ext.begin(), ext.end());
  detail::sosfilt_ss(sos, ext);
  std::reverse(ext.begin(), ext.end());

  std::copy(ext.begin() + pad, ext.begin() + pad + n, out.samples.begin());
  return out;
}

// Centered moving average over `w` samples (w-1)/2 back, w/2 forward,
// truncated at the boundaries.
inline std::vector<double> moving_average(const std::vector<double>& x, int w) {
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  if (n == 0 || w < 1) return out;
  const long rl = (w - 1) / 2;
  const long rr = w / 2;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  for (long i = 0; i < long(n); ++i) {
    const long a = std::max<long>(0, i - rl);
    const long b = std::min<long>(long(n) - 1, i + rr);
    out[std::size_t(i)] = (prefix[b + 1] - prefix[a]) / double(b - a + 1);
  }
  return out;
}

namespace detail {

// Exact sliding median over a FIFO window: two lazy-deletion binary heaps of
// (value, index) pairs; the index makes the ordering total so membership is
// unambiguous under ties.
class SlidingMedian {
 public:
  explicit SlidingMedian(std::size_t expected) {
    lo_.reserve(expected);
    hi_.reserve(expected);
  }

  void insert(double v, int idx) {
    ensure_size(idx);
    Entry e{v, idx};
    prune_lo();
    if (n_lo_ == 0 || !(lo_.front() < e)) {
      push_lo(e);
      ++n_lo_;
    } else {
      push_hi(e);
      ++n_hi_;
    }
    rebalance();
  }

  void erase(double v, int idx) {
    Entry e{v, idx};
    // Decide membership before marking dead: if e were already dead the live
    // lo top could shift below it and misclassify it as belonging to hi.
    prune_lo();
    const bool in_lo = n_lo_ > 0 && !(lo_.front() < e);
    dead_[std::size_t(idx)] = true;
    if (in_lo) {
      --n_lo_;
    } else {
      --n_hi_;
    }
    rebalance();
  }

  double median() {
    prune_lo();
    if (n_lo_ + n_hi_ == 0) return 0.0;
    if (((n_lo_ + n_hi_) & 1u) != 0) return lo_.front().v;
    prune_hi();
    return 0.5 * (lo_.front().v + hi_.front().v);
  }

 private:
  struct Entry {
    double v;
    int idx;
    // Max-heap order on (v, idx) for lo_; hi_ negates via Greater.
    bool operator<(const Entry& o) const {
      return v < o.v || (v == o.v && idx < o.idx);
    }
  };
  struct Less {
    bool operator()(const Entry& a, const Entry& b) const { return a < b; }
  };
  struct Greater {
    bool operator()(const Entry& a, const Entry& b) const { return b < a; }
  };

  void ensure_size(int idx) {
    if (std::size_t(idx) >= dead_.size()) dead_.resize(std::size_t(idx) + 1, false);
  }
  void push_lo(const Entry& e) {
    lo_.push_back(e);
    std::push_heap(lo_.begin(), lo_.end(), Less{});
  }
  void push_hi(const Entry& e) {
    hi_.push_back(e);
    std::push_heap(hi_.begin(), hi_.end(), Greater{});
  }
  Entry pop_lo() {
    prune_lo();
    Entry e = lo_.front();
    std::pop_heap(lo_.begin(), lo_.end(), Less{});
    lo_.pop_back();
    return e;
  }
  Entry pop_hi() {
    prune_hi();
    Entry e = hi_.front();
    std::pop_heap(hi_.begin(), hi_.end(), Greater{});
    hi_.pop_back();
    return e;
  }
  void prune_lo() {
    while (!lo_.empty() && dead_[std::size_t(lo_.front().idx)]) {
      std::pop_heap(lo_.begin(), lo_.end(), Less{});
      lo_.pop_back();
    }
  }
  void prune_hi() {
    while (!hi_.empty() && dead_[std::size_t(hi_.front().idx)]) {
      std::pop_heap(hi_.begin(), hi_.end(), Greater{});
      hi_.pop_back();
    }
  }
  // Keep n_lo_ == n_hi_ or n_lo_ == n_hi_ + 1.
  void rebalance() {
    while (n_lo_ > n_hi_ + 1) {
      push_hi(pop_lo());
      --n_lo_;
      ++n_hi_;
    }
    while (n_hi_ > n_lo_) {
      push_lo(pop_hi());
      --n_hi_;
      ++n_lo_;
    }
  }

  std::vector<Entry> lo_;  // max-heap: lower half
  std::vector<Entry> hi_;  // min-heap: upper half
  std::vector<bool> dead_;
  std::size_t n_lo_ = 0;
  std::size_t n_hi_ = 0;
};

}  // namespace detail

// Median over a centered window of round(window_s * rate) samples, truncated
// at the boundaries; even window counts average the two middle values.
inline SampledSignal moving_median(const SampledSignal& signal,
                                   double window_s) {
  if (signal.samples.empty())
    throw std::invalid_argument("moving_median: empty signal");
  if (!(window_s > 0.0))
    throw std::invalid_argument("moving_median: window must be positive");
  const long n = long(signal.samples.size());
  long w = std::max<long>(1, std::lround(window_s * signal.sample_rate_hz));
  const long rl = (w - 1) / 2;
  const long rr = w / 2;
  SampledSignal out = signal;
  detail::SlidingMedian sm(std::size_t(std::min<long>(n, w)));
  const auto& x = signal.samples;
  for (long j = 0; j <= std::min(rr, n - 1); ++j) sm.insert(x[std::size_t(j)], int(j));
  for (long i = 0; i < n; ++i) {
    if (i > 0) {
      const long enter = i + rr;
      if (enter < n) sm.insert(x[std::size_t(enter)], int(enter));
      const long leave = i - rl - 1;
      if (leave >= 0) sm.erase(x[std::size_t(leave)], int(leave));
    }
    out.samples[std::size_t(i)] = sm.median();
  }
  return out;
}

// Haar wavelet response at one scale: coefficient i correlates the signal with
// -1 over [i-scale, i) and +1 over [i, i+scale), normalized by 1/sqrt(2*scale).
// Positions whose support leaves the signal are zero.
inline std::vector<double> cwt_haar(const SampledSignal& signal, int scale) {
  const long n = long(signal.samples.size());
  if (scale < 2 || long(scale) >= n)
    throw std::invalid_argument("cwt_haar: scale out of range");
  std::vector<double> out(std::size_t(n), 0.0);
  std::vector<double> prefix(std::size_t(n) + 1, 0.0);
  for (long i = 0; i < n; ++i)
    prefix[std::size_t(i) + 1] = prefix[std::size_t(i)] + signal.samples[std::size_t(i)];
  const double norm = 1.0 / std::sqrt(2.0 * double(scale));
  for (long i = scale; i + scale <= n; ++i) {
    const double first = prefix[std::size_t(i)] - prefix[std::size_t(i - scale)];
    const double second = prefix[std::size_t(i + scale)] - prefix[std::size_t(i)];
    out[std::size_t(i)] = (second - first) * norm;
  }
  return out;
}

// Local maxima with height, prominence, and width-at-half-prominence.
struct PeakList {
  std::vector<int> indices;
  std::vector<double> heights;
  std::vector<double> prominences;
  std::vector<double> widths_at_half_height;

  std::size_t size() const { return indices.size(); }
};

// Peaks are plateau-aware local maxima filtered by min_height, then
// min_prominence (valley-to-peak rise bounded by taller samples or the signal
// ends), then min_width measured at half prominence with linear interpolation.
// min_width == 0 disables the width constraint.
inline PeakList find_peaks(const std::vector<double>& x, int min_width,
                           double min_height, double min_prominence) {
  PeakList out;
  const long n = long(x.size());
  if (min_width < 0) throw std::invalid_argument("find_peaks: min_width >= 0");
  if (n < 3) return out;

  for (long i = 1; i < n - 1; ++i) {
    if (!(x[std::size_t(i)] > x[std::size_t(i - 1)])) continue;
    long j = i;
    while (j + 1 < n && x[std::size_t(j + 1)] == x[std::size_t(i)]) ++j;
    if (j + 1 >= n || !(x[std::size_t(j + 1)] < x[std::size_t(i)])) {
      i = j;
      continue;
    }
    const long peak = (i + j) / 2;
    i = j;
    const double h = x[std::size_t(peak)];
    if (h < min_height) continue;

    // Prominence: search each side until a taller sample or the end,
    // tracking the lowest valley on the way.
    double left_min = h;
    for (long k = peak - 1; k >= 0; --k) {
      if (x[std::size_t(k)] > h) break;
      left_min = std::min(left_min, x[std::size_t(k)]);
    }
    double right_min = h;
    for (long k = peak + 1; k < n; ++k) {
      if (x[std::size_t(k)] > h) break;
      right_min = std::min(right_min, x[std::size_t(k)]);
    }
    const double prominence = h - std::max(left_min, right_min);
    if (prominence < min_prominence) continue;

    // Width at half prominence.
    const double eval = h - 0.5 * prominence;
    double left_pos = 0.0;
    {
      long k = peak;
      while (k > 0 && x[std::size_t(k - 1)] > eval) --k;
      if (k == 0) {
        left_pos = 0.0;
      } else {
        const double y1 = x[std::size_t(k - 1)];
        const double y2 = x[std::size_t(k)];
        left_pos = double(k - 1) + (eval - y1) / (y2 - y1);
      }
    }
    double right_pos = double(n - 1);
    {
      long k = peak;
      while (k < n - 1 && x[std::size_t(k + 1)] > eval) ++k;
      if (k == n - 1) {
        right_pos = double(n - 1);
      } else {
        const double y1 = x[std::size_t(k)];
        const double y2 = x[std::size_t(k + 1)];
        right_pos = double(k) + (y1 - eval) / (y1 - y2);
      }
    }
    const double width = right_pos - left_pos;
    if (width < double(min_width)) continue;

    out.indices.push_back(int(peak));
    out.heights.push_back(h);
    out.prominences.push_back(prominence);
    out.widths_at_half_height.push_back(width);
  }
  return out;
}

// Highest local maximum of the normalized autocorrelation within a lag range.
struct AutocorrPeak {
  int lag = 0;
  double height = 0.0;
  double prominence = 0.0;
};

// Normalization makes lag 0 unity; a zero-variance input (or a range with no
// local maximum) degenerates to height 0 so callers can gate on it.
inline AutocorrPeak autocorr_peak(const std::vector<double>& x, int lag_lo,
                                  int lag_hi) {
  const long n = long(x.size());
  if (!(0 < lag_lo && lag_lo < lag_hi && lag_hi < n))
    throw std::invalid_argument("autocorr_peak: invalid lag range");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(n);
  double denom = 0.0;
  for (double v : x) denom += (v - mean) * (v - mean);
  AutocorrPeak best;
  best.lag = lag_lo;
  if (denom <= 0.0) return best;

  const long top = std::min<long>(n - 1, long(lag_hi) + 1);
  std::vector<double> r(std::size_t(top) + 1, 0.0);
  for (long k = 0; k <= top; ++k) {
    double s = 0.0;
    for (long i = 0; i + k < n; ++i)
      s += (x[std::size_t(i)] - mean) * (x[std::size_t(i + k)] - mean);
    r[std::size_t(k)] = s / denom;
  }

  bool found = false;
  for (long k = lag_lo; k <= lag_hi; ++k) {
    if (k - 1 < 0 || k + 1 > top) continue;
    if (!(r[std::size_t(k)] > r[std::size_t(k - 1)] &&
          r[std::size_t(k)] >= r[std::size_t(k + 1)]))
      continue;
    if (found && r[std::size_t(k)] <= best.height) continue;
    found = true;
    best.lag = int(k);
    best.height = r[std::size_t(k)];
    // Prominence within the computed autocorrelation span.
    double left_min = best.height;
    for (long j = k - 1; j >= 0; --j) {
      if (r[std::size_t(j)] > best.height) break;
      left_min = std::min(left_min, r[std::size_t(j)]);
    }
    double right_min = best.height;
    for (long j = k + 1; j <= top; ++j) {
      if (r[std::size_t(j)] > best.height) break;
      right_min = std::min(right_min, r[std::size_t(j)]);
    }
    best.prominence = best.height - std::max(left_min, right_min);
  }
  return best;
}

}  // namespace blastdose
