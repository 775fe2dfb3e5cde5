#pragma once
// Accelerometry segmentation into gait and low-movement bouts, a gait
// periodicity gate, time-delay-embedding eigenspectrum features, and
// path-length balance features over 5 s frames.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "blastdose/pca.hpp"
#include "blastdose/signal.hpp"

namespace blastdose {

// Three-axis acceleration record, axes in m/s^2, equal lengths.
struct AccelSignal {
  std::array<std::vector<double>, 3> axes;
  double sample_rate_hz = 100.0;
  double start_time = 0.0;  // epoch seconds

  std::size_t size() const { return axes[0].size(); }
};

enum class FrameKind { kGait, kLowMovement };

// Exactly 5 s of samples at 100 Hz (500 rows per axis).
struct AccelFrame {
  std::array<std::vector<double>, 3> axes;
  double start_time = 0.0;
  FrameKind kind = FrameKind::kGait;
};

struct TimeInterval {
  double begin = 0.0;  // epoch seconds, half-open [begin, end)
  double end = 0.0;
};

struct BoutSegmentation {
  std::vector<TimeInterval> gait_bouts;
  std::vector<TimeInterval> lm_bouts;
  std::vector<double> variance_series;  // one entry per window hop
  double window_s = 10.0;
  double hop_s = 1.0;
};

struct GaitFeature {
  std::vector<double> raw_tde;   // 105 values: 5 scales x 21 eigenvalues
  std::vector<double> reduced;   // filled once a projection has been fit
  double frame_time = 0.0;
};

struct BalanceFeature {
  double path_length = 0.0;
  double frame_time = 0.0;
};

struct MotionConfig {
  double var_window_s = 10.0;
  double var_hop_s = 1.0;
  double gait_var_threshold = 0.03;
  double gait_merge_gap_s = 15.0;
  double lm_var_lo = 0.001;
  double lm_var_hi = 0.01;
  double lm_min_duration_s = 30.0;
  double frame_s = 5.0;
  // Periodicity gate on the first principal component of a gait frame.
  double lag_lo_s = 0.35;
  double lag_hi_s = 0.85;
  double min_autocorr_height = 0.2;
  double min_autocorr_prominence = 0.2;
};

// Delay spacings in samples at 100 Hz (30, 70, 150, 310, 610 ms).
inline constexpr std::array<int, 5> kTdeScales = {3, 7, 15, 31, 61};
inline constexpr int kTdeDelays = 7;
inline constexpr int kTdeDim = 21;  // 3 axes x 7 delays

namespace detail {

inline void require_accel(const AccelSignal& accel) {
  if (accel.axes[1].size() != accel.axes[0].size() ||
      accel.axes[2].size() != accel.axes[0].size())
    throw std::invalid_argument("accel: axis lengths differ");
  if (accel.sample_rate_hz <= 0.0)
    throw std::invalid_argument("accel: sample rate must be positive");
}

}  // namespace detail

// Splits a record into gait bouts (magnitude variance above threshold in
// sliding 10 s windows, nearby bouts joined across gaps of at most 15 s) and
// low-movement bouts (variance in a low band sustained for at least 30 s).
// The magnitude is demeaned globally before the windowed variance so its
// absolute numerical level cannot swamp the second-moment arithmetic.
inline BoutSegmentation segment_bouts(const AccelSignal& accel,
                                      const MotionConfig& cfg = {}) {
  detail::require_accel(accel);
  const std::size_t n = accel.size();
  const double rate = accel.sample_rate_hz;
  const std::size_t win = std::size_t(std::lround(cfg.var_window_s * rate));
  const std::size_t hop = std::size_t(std::lround(cfg.var_hop_s * rate));
  if (win == 0 || hop == 0)
    throw std::invalid_argument("segment_bouts: window and hop must be positive");
  if (n < win)
    throw std::invalid_argument("segment_bouts: record shorter than the variance window");

  std::vector<double> mag(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mag[i] = std::sqrt(accel.axes[0][i] * accel.axes[0][i] +
                       accel.axes[1][i] * accel.axes[1][i] +
                       accel.axes[2][i] * accel.axes[2][i]);
    mean += mag[i];
  }
  mean /= double(n);
  std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = mag[i] - mean;
    s1[i + 1] = s1[i] + c;
    s2[i + 1] = s2[i] + c * c;
  }

  BoutSegmentation out;
  out.window_s = cfg.var_window_s;
  out.hop_s = cfg.var_hop_s;
  const std::size_t n_windows = (n - win) / hop + 1;
  out.variance_series.resize(n_windows);
  for (std::size_t k = 0; k < n_windows; ++k) {
    const std::size_t a = k * hop, b = a + win;
    const double m = (s1[b] - s1[a]) / double(win);
    out.variance_series[k] = (s2[b] - s2[a]) / double(win) - m * m;
  }

  const auto interval_at = [&](std::size_t k0, std::size_t k1) {
    TimeInterval iv;
    iv.begin = accel.start_time + double(k0) * cfg.var_hop_s;
    iv.end = accel.start_time + double(k1) * cfg.var_hop_s + cfg.var_window_s;
    return iv;
  };

  // Gait: runs of suprathreshold windows, then joined across short gaps.
  for (std::size_t k = 0; k < n_windows;) {
    if (!(out.variance_series[k] > cfg.gait_var_threshold)) {
      ++k;
      continue;
    }
    std::size_t k1 = k;
    while (k1 + 1 < n_windows &&
           out.variance_series[k1 + 1] > cfg.gait_var_threshold)
      ++k1;
    const TimeInterval iv = interval_at(k, k1);
    if (!out.gait_bouts.empty() &&
        iv.begin - out.gait_bouts.back().end <= cfg.gait_merge_gap_s)
      out.gait_bouts.back().end = iv.end;
    else
      out.gait_bouts.push_back(iv);
    k = k1 + 1;
  }

  // Low movement: runs inside the low-variance band spanning >= 30 s.
  for (std::size_t k = 0; k < n_windows;) {
    const auto in_band = [&](std::size_t i) {
      return out.variance_series[i] > cfg.lm_var_lo &&
             out.variance_series[i] < cfg.lm_var_hi;
    };
    if (!in_band(k)) {
      ++k;
      continue;
    }
    std::size_t k1 = k;
    while (k1 + 1 < n_windows && in_band(k1 + 1)) ++k1;
    const TimeInterval iv = interval_at(k, k1);
    if (iv.end - iv.begin >= cfg.lm_min_duration_s) out.lm_bouts.push_back(iv);
    k = k1 + 1;
  }
  return out;
}

// Cuts contiguous frame_s-second frames from each bout; a trailing partial
// frame is dropped.
inline std::vector<AccelFrame> frames_from_bouts(
    const AccelSignal& accel, const std::vector<TimeInterval>& bouts,
    FrameKind kind, const MotionConfig& cfg = {}) {
  detail::require_accel(accel);
  const double rate = accel.sample_rate_hz;
  const std::size_t frame_len = std::size_t(std::lround(cfg.frame_s * rate));
  std::vector<AccelFrame> frames;
  for (const TimeInterval& iv : bouts) {
    const std::size_t first =
        std::size_t(std::lround((iv.begin - accel.start_time) * rate));
    const std::size_t count =
        std::size_t(std::floor((iv.end - iv.begin) / cfg.frame_s));
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t a = first + j * frame_len;
      if (a + frame_len > accel.size()) break;
      AccelFrame f;
      f.kind = kind;
      f.start_time = accel.start_time + double(a) / rate;
      for (int ax = 0; ax < 3; ++ax)
        f.axes[ax].assign(accel.axes[ax].begin() + long(a),
                          accel.axes[ax].begin() + long(a + frame_len));
      frames.push_back(std::move(f));
    }
  }
  return frames;
}

// Gait frames must carry a periodic stride: the first principal component of
// the three axes needs an autocorrelation peak in the 0.35-0.85 s lag range
// with height and prominence both at least 0.2. Constant frames fail.
inline bool periodicity_gate(const AccelFrame& frame,
                             const MotionConfig& cfg = {}) {
  const std::size_t n = frame.axes[0].size();
  std::vector<std::vector<double>> rows(n, std::vector<double>(3));
  for (std::size_t i = 0; i < n; ++i)
    for (int ax = 0; ax < 3; ++ax) rows[i][ax] = frame.axes[ax][i];
  const PcaProjector pca = pca_fit(rows, 1);
  if (pca.eigenvalues[0] <= 0.0) return false;
  std::vector<double> pc1(n);
  for (std::size_t i = 0; i < n; ++i) pc1[i] = pca.project(rows[i])[0];
  const double rate = double(n) / 5.0;  // frames are 5 s long
  const int lo = int(std::lround(cfg.lag_lo_s * rate));
  const int hi = int(std::lround(cfg.lag_hi_s * rate));
  const AutocorrPeak pk = autocorr_peak(pc1, lo, hi);
  return pk.height >= cfg.min_autocorr_height &&
         pk.prominence >= cfg.min_autocorr_prominence;
}

// Time-delay-embedding eigenspectrum: for each delay spacing, embed every
// axis with 7 delays, form the 21 x 21 correlation matrix over the time
// points where all delays stay in-frame, and emit its eigenvalues sorted
// descending. A constant channel contributes zero off-diagonal correlation.
inline std::vector<double> tde_features(const AccelFrame& frame) {
  const long n = long(frame.axes[0].size());
  std::vector<double> out;
  out.reserve(kTdeScales.size() * kTdeDim);
  for (const int d : kTdeScales) {
    const long t_max = n - 6L * d;
    if (t_max < 2)
      throw std::invalid_argument("tde_features: frame shorter than embedding span");
    Eigen::MatrixXd v(kTdeDim, t_max);
    for (int ax = 0; ax < 3; ++ax)
      for (int j = 0; j < kTdeDelays; ++j)
        for (long t = 0; t < t_max; ++t)
          v(ax * kTdeDelays + j, t) = frame.axes[ax][std::size_t(t + j * d)];
    Eigen::VectorXd mu = v.rowwise().mean();
    v.colwise() -= mu;
    Eigen::VectorXd sd(kTdeDim);
    for (int c = 0; c < kTdeDim; ++c)
      sd(c) = std::sqrt(v.row(c).squaredNorm() / double(t_max));
    Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(kTdeDim, kTdeDim);
    for (int a = 0; a < kTdeDim; ++a) {
      if (sd(a) <= 0.0) continue;  // constant channel: off-diagonal stays 0
      for (int b = a + 1; b < kTdeDim; ++b) {
        if (sd(b) <= 0.0) continue;
        const double c =
            v.row(a).dot(v.row(b)) / (double(t_max) * sd(a) * sd(b));
        corr(a, b) = c;
        corr(b, a) = c;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(corr);
    const Eigen::VectorXd ev = solver.eigenvalues();
    for (int i = kTdeDim - 1; i >= 0; --i) out.push_back(ev(i));
  }
  return out;
}

// Total Euclidean step length of the acceleration trajectory over the frame.
// Zero exactly when the frame is constant; shifting all samples by a constant
// vector changes nothing and scaling amplitudes scales it linearly.
inline double path_length(const AccelFrame& frame) {
  const std::size_t n = frame.axes[0].size();
  double total = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double dx = frame.axes[0][i] - frame.axes[0][i - 1];
    const double dy = frame.axes[1][i] - frame.axes[1][i - 1];
    const double dz = frame.axes[2][i] - frame.axes[2][i - 1];
    total += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return total;
}

struct SessionMotionFeatures {
  std::vector<GaitFeature> gait;
  std::vector<BalanceFeature> balance;
  BoutSegmentation segmentation;
};

// Full per-session extraction: segmentation, frame cutting, periodicity
// gating and eigenspectrum for gait, path length for low movement. The
// reduced gait vectors stay empty here; a projection fit on training data is
// applied afterwards with apply_gait_projection.
inline SessionMotionFeatures extract_session_features(
    const AccelSignal& accel, const MotionConfig& cfg = {}) {
  SessionMotionFeatures out;
  out.segmentation = segment_bouts(accel, cfg);
  for (AccelFrame& f :
       frames_from_bouts(accel, out.segmentation.gait_bouts, FrameKind::kGait, cfg)) {
    if (!periodicity_gate(f, cfg)) continue;
    GaitFeature g;
    g.raw_tde = tde_features(f);
    g.frame_time = f.start_time;
    out.gait.push_back(std::move(g));
  }
  for (AccelFrame& f : frames_from_bouts(accel, out.segmentation.lm_bouts,
                                         FrameKind::kLowMovement, cfg)) {
    BalanceFeature b;
    b.path_length = path_length(f);
    b.frame_time = f.start_time;
    out.balance.push_back(b);
  }
  return out;
}

inline void apply_gait_projection(std::vector<GaitFeature>& gait,
                                  const PcaProjector& projector) {
  for (GaitFeature& g : gait) g.reduced = projector.project(g.raw_tde);
}

}  // namespace blastdose
