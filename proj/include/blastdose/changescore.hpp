#pragma once
// Individualized feature change scores: running means over recent
// observations, then online z-scoring against recursively filtered moments
// with heavy exponential smoothing of the score itself.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace blastdose {

struct FeatureStream {
  std::vector<double> timestamps;  // epoch seconds, nondecreasing
  std::vector<double> values;
};

// Mean of each value together with up to window_count preceding values, so a
// full window averages window_count + 1 observations (1..40 with window 30
// yields 25.0 at the last index).
inline std::vector<double> running_mean(const std::vector<double>& values,
                                        int window_count) {
  if (window_count < 0)
    throw std::invalid_argument("running_mean: window_count must be >= 0");
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (i > std::size_t(window_count)) acc -= values[i - std::size_t(window_count) - 1];
    const std::size_t used = std::min(i, std::size_t(window_count)) + 1;
    out[i] = acc / double(used);
  }
  return out;
}

// Online score state for one feature channel. Moments follow
// f_k(n) = decay * f_k(n-1) + (1 - decay) * f(n)^k, seeded with the first
// observation, so the very first instantaneous score is exactly zero. The
// variance estimate carries a 1/n floor, which keeps the denominator positive
// for any input and shrinks as evidence accumulates.
struct ChangeTracker {
  double alpha = 1e-4;        // smoothing constant for the reported score
  double moment_decay = 0.999;

  std::size_t n = 0;   // observations consumed
  double m1 = 0.0;     // running first moment
  double m2 = 0.0;     // running second moment
  double zs = 0.0;     // smoothed score, initialized to 0

  struct Update {
    double z = 0.0;
    double z_smoothed = 0.0;
  };

  Update update(double f) {
    if (!std::isfinite(f))
      throw std::invalid_argument("change tracker: non-finite feature value");
    ++n;
    if (n == 1) {
      m1 = f;
      m2 = f * f;
    } else {
      m1 = moment_decay * m1 + (1.0 - moment_decay) * f;
      m2 = moment_decay * m2 + (1.0 - moment_decay) * f * f;
    }
    const double variance = std::max(0.0, m2 - m1 * m1);
    const double z = (f - m1) / std::sqrt(variance + 1.0 / double(n));
    zs = alpha * z + (1.0 - alpha) * zs;
    return {z, zs};
  }
};

struct ScoreSeries {
  std::vector<double> timestamps;
  std::vector<double> raw_feature;
  std::vector<double> running_mean;
  std::vector<double> z_instant;
  std::vector<double> z_smoothed;
};

// Running mean first, then the online tracker over the smoothed values.
inline ScoreSeries score_stream(const FeatureStream& stream, int window_count,
                                const ChangeTracker& initial = {}) {
  if (stream.timestamps.size() != stream.values.size())
    throw std::invalid_argument("score_stream: timestamp/value length mismatch");
  for (std::size_t i = 1; i < stream.timestamps.size(); ++i)
    if (stream.timestamps[i] < stream.timestamps[i - 1])
      throw std::invalid_argument("score_stream: timestamps must be sorted");
  ScoreSeries out;
  out.timestamps = stream.timestamps;
  out.raw_feature = stream.values;
  out.running_mean = running_mean(stream.values, window_count);
  out.z_instant.resize(stream.values.size());
  out.z_smoothed.resize(stream.values.size());
  ChangeTracker tracker = initial;
  for (std::size_t i = 0; i < out.running_mean.size(); ++i) {
    const auto u = tracker.update(out.running_mean[i]);
    out.z_instant[i] = u.z;
    out.z_smoothed[i] = u.z_smoothed;
  }
  return out;
}

}  // namespace blastdose
