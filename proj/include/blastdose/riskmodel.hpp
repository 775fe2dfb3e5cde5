#pragma once
// Exposure risk modeling: a staircase of higher/lower GMM pairs over
// percentile-thresholded dose labels, leave-one-subject-out evaluation with
// per-fold gait projection fitting, and session-level score fusion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "blastdose/changescore.hpp"
#include "blastdose/gmm.hpp"
#include "blastdose/pca.hpp"
#include "blastdose/rng.hpp"
#include "blastdose/stats.hpp"

namespace blastdose {

// One modality's feature observations within one session. Gait rows are the
// raw 105-value eigenspectra (projected per training fold); the other
// modalities carry one value per row.
struct ObservationStream {
  std::vector<double> timestamps;
  std::vector<std::vector<double>> rows;
};

struct SessionRecord {
  std::string session_id;
  std::string subject_id;
  std::map<std::string, ObservationStream> modalities;
  // Accumulating dose series used to label observations during training.
  std::vector<double> dose_times;
  std::vector<double> dose_values;
};

struct StaircasePartition {
  double percentile = 0.0;
  double threshold = 0.0;  // dose value at the percentile
  Gmm higher;
  Gmm lower;
};

struct StaircaseModel {
  std::string modality;
  std::vector<StaircasePartition> partitions;
  // Wide single-Gaussian floor shared by both likelihood sums. It bounds the
  // score for observations far outside every trained component (the ratio
  // tends to zero there instead of exploding) and keeps score scales
  // comparable across independently trained models. A weight of zero disables
  // it, leaving the plain ensemble ratio.
  Gmm background;
  double background_weight = 0.0;
};

// Trained artifacts for one modality: the staircase plus, for gait, the
// projection fit on training folds only.
struct ModalityModel {
  StaircaseModel staircase;
  PcaProjector projector;
  bool has_projector = false;
};

struct SessionScore {
  std::string session_id;
  std::string subject_id;
  std::string modality;
  std::vector<double> timestamps;
  std::vector<double> llr;
  double max_score = 0.0;
};

struct RiskConfig {
  int gmm_components = 5;
  double gmm_regularization = 1e-6;
  // Mixing weight of the shared wide background component fit on the whole
  // training pool; see StaircaseModel::background.
  double background_weight = 1e-3;
  std::vector<double> percentiles = {12.5, 25.0, 37.5, 50.0, 62.5, 75.0, 87.5};
  double min_session_hours = 1.0;
  std::size_t min_frames = 25;  // gait and balance inclusion
  int gait_pca_components = 20;
  // Deterministic training-set caps keep EM cost bounded on large cohorts.
  std::size_t max_train_obs_vector = 2000;
  std::size_t max_train_obs_scalar = 4000;
  std::size_t max_pca_rows = 5000;
  int window_gait = 30;
  int window_balance = 30;
  int window_blink = 20;
  int window_saccade = 20;

  int window_for(const std::string& modality) const {
    if (modality == "gait") return window_gait;
    if (modality == "balance") return window_balance;
    if (modality == "blink") return window_blink;
    if (modality == "saccade") return window_saccade;
    return window_gait;
  }
};

namespace detail {

inline bool frame_minimum_applies(const std::string& modality) {
  return modality == "gait" || modality == "balance";
}

inline std::uint64_t mix64(std::uint64_t x) { return splitmix64(x); }

inline std::uint64_t hash_name(const std::string& name) {
  return fnv1a64(name.data(), name.size());
}

}  // namespace detail

// Whether one session qualifies for a modality: data present, spanning at
// least the minimum duration, and (gait/balance) enough frames.
inline bool session_included(const SessionRecord& s, const std::string& modality,
                             const RiskConfig& cfg = {}) {
  const auto it = s.modalities.find(modality);
  if (it == s.modalities.end() || it->second.rows.empty()) return false;
  const auto& t = it->second.timestamps;
  if (t.back() - t.front() < 3600.0 * cfg.min_session_hours) return false;
  if (detail::frame_minimum_applies(modality) &&
      it->second.rows.size() < cfg.min_frames)
    return false;
  return true;
}

// Accumulating dose at time t: value of the nearest preceding dose sample,
// zero before the first event.
inline double dose_label_at(const SessionRecord& s, double t) {
  const auto it =
      std::upper_bound(s.dose_times.begin(), s.dose_times.end(), t);
  if (it == s.dose_times.begin()) return 0.0;
  return s.dose_values[std::size_t(it - s.dose_times.begin()) - 1];
}

// Per-column change scores over an observation stream; rows of smoothed
// z-scores aligned with the input timestamps.
inline std::vector<std::vector<double>> change_score_rows(
    const std::vector<double>& timestamps,
    const std::vector<std::vector<double>>& rows, int window_count) {
  std::vector<std::vector<double>> out(rows.size());
  if (rows.empty()) return out;
  const std::size_t d = rows[0].size();
  for (auto& r : out) r.resize(d);
  FeatureStream column;
  column.timestamps = timestamps;
  column.values.resize(rows.size());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) column.values[i] = rows[i][j];
    const ScoreSeries s = score_stream(column, window_count);
    for (std::size_t i = 0; i < rows.size(); ++i) out[i][j] = s.z_smoothed[i];
  }
  return out;
}

// Staircase training: one higher/lower GMM pair per percentile threshold of
// the label distribution. Labels must take more than 7 distinct values and
// every threshold must leave both classes nonempty.
inline StaircaseModel train_staircase(
    const std::vector<std::vector<double>>& features,
    const std::vector<double>& labels, std::uint64_t seed,
    const RiskConfig& cfg = {}, const std::string& modality = "") {
  if (features.size() != labels.size() || features.empty())
    throw std::invalid_argument("train_staircase: feature/label size mismatch");
  std::vector<double> distinct = labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() <= cfg.percentiles.size())
    throw std::invalid_argument(
        "train_staircase: labels must span more than 7 distinct values");

  StaircaseModel model;
  model.modality = modality;
  for (std::size_t p = 0; p < cfg.percentiles.size(); ++p) {
    StaircasePartition part;
    part.percentile = cfg.percentiles[p];
    part.threshold = percentile_linear(labels, cfg.percentiles[p]);
    std::vector<std::vector<double>> hi, lo;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= part.threshold)
        hi.push_back(features[i]);
      else
        lo.push_back(features[i]);
    }
    if (hi.empty() || lo.empty())
      throw std::invalid_argument(
          "train_staircase: a threshold left one exposure class empty");
    part.higher = fit_gmm(hi, cfg.gmm_components, detail::mix64(seed + 2 * p),
                          cfg.gmm_regularization);
    part.lower = fit_gmm(lo, cfg.gmm_components,
                         detail::mix64(seed + 2 * p + 1),
                         cfg.gmm_regularization);
    model.partitions.push_back(std::move(part));
  }
  if (cfg.background_weight > 0.0) {
    const std::size_t d = features[0].size();
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (const auto& f : features)
      for (std::size_t j = 0; j < d; ++j) mean[j] += f[j];
    for (std::size_t j = 0; j < d; ++j) mean[j] /= double(features.size());
    for (const auto& f : features)
      for (std::size_t j = 0; j < d; ++j) {
        const double c = f[j] - mean[j];
        var[j] += c * c;
      }
    for (std::size_t j = 0; j < d; ++j)
      var[j] =
          std::max(var[j] / double(features.size()), cfg.gmm_regularization);
    model.background.k = 1;
    model.background.weights = {1.0};
    model.background.means = {std::move(mean)};
    model.background.variances = {std::move(var)};
    model.background.regularization = cfg.gmm_regularization;
    model.background_weight = cfg.background_weight;
  }
  return model;
}

// Log-likelihood ratio of the ensemble: overflow-safe sums of likelihoods
// across partitions, higher minus lower. Swapping every higher/lower pair
// negates the result exactly.
inline double risk_score(const StaircaseModel& model,
                         const std::vector<double>& x) {
  std::vector<double> hi, lo;
  hi.reserve(model.partitions.size() + 1);
  lo.reserve(model.partitions.size() + 1);
  for (const auto& part : model.partitions) {
    hi.push_back(gmm_log_pdf(part.higher, x));
    lo.push_back(gmm_log_pdf(part.lower, x));
  }
  if (model.background_weight > 0.0) {
    // Identical term on both sides: preserves exact antisymmetry under a
    // higher/lower swap while pulling the ratio to zero wherever neither
    // class explains the observation.
    const double floor_term = std::log(model.background_weight) +
                              gmm_log_pdf(model.background, x);
    hi.push_back(floor_term);
    lo.push_back(floor_term);
  }
  return log_sum_exp(hi) - log_sum_exp(lo);
}

namespace detail {

// Deterministic subsample: keeps exactly cap rows spread evenly across the
// pool, so the subsample's label distribution matches the full set.
template <typename T>
void cap_rows(std::vector<T>* rows, std::vector<double>* labels,
              std::size_t cap) {
  if (cap == 0 || rows->size() <= cap) return;
  const std::size_t n = rows->size();
  std::vector<T> kept_rows;
  std::vector<double> kept_labels;
  kept_rows.reserve(cap);
  if (labels) kept_labels.reserve(cap);
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j = i * n / cap;
    kept_rows.push_back(std::move((*rows)[j]));
    if (labels) kept_labels.push_back((*labels)[j]);
  }
  *rows = std::move(kept_rows);
  if (labels) *labels = std::move(kept_labels);
}

}  // namespace detail

// Trains one modality's model on every included session whose subject is not
// excluded_subject (empty string = train on everyone, the deployment model).
inline ModalityModel train_modality_model(
    const std::vector<SessionRecord>& sessions, const std::string& modality,
    const std::string& excluded_subject, std::uint64_t seed,
    const RiskConfig& cfg = {}) {
  std::vector<const SessionRecord*> train;
  for (const auto& s : sessions)
    if (s.subject_id != excluded_subject && session_included(s, modality, cfg))
      train.push_back(&s);
  if (train.empty())
    throw std::invalid_argument("train_modality_model: no training sessions");

  ModalityModel model;
  if (modality == "gait") {
    std::vector<std::vector<double>> raw;
    for (const auto* s : train)
      for (const auto& row : s->modalities.at(modality).rows)
        raw.push_back(row);
    detail::cap_rows(&raw, nullptr, cfg.max_pca_rows);
    model.projector = pca_fit(raw, std::size_t(cfg.gait_pca_components));
    model.has_projector = true;
  }

  std::vector<std::vector<double>> features;
  std::vector<double> labels;
  for (const auto* s : train) {
    const auto& obs = s->modalities.at(modality);
    std::vector<std::vector<double>> rows = obs.rows;
    if (model.has_projector)
      for (auto& r : rows) r = model.projector.project(r);
    const auto scored =
        change_score_rows(obs.timestamps, rows, cfg.window_for(modality));
    for (std::size_t i = 0; i < scored.size(); ++i) {
      features.push_back(scored[i]);
      labels.push_back(dose_label_at(*s, obs.timestamps[i]));
    }
  }
  const std::size_t cap = (model.has_projector || features[0].size() > 1)
                              ? cfg.max_train_obs_vector
                              : cfg.max_train_obs_scalar;
  detail::cap_rows(&features, &labels, cap);
  model.staircase = train_staircase(features, labels, seed, cfg, modality);
  return model;
}

// Scores one session under a trained modality model.
inline SessionScore score_session(const SessionRecord& session,
                                  const std::string& modality,
                                  const ModalityModel& model,
                                  const RiskConfig& cfg = {}) {
  const auto& obs = session.modalities.at(modality);
  std::vector<std::vector<double>> rows = obs.rows;
  if (model.has_projector)
    for (auto& r : rows) r = model.projector.project(r);
  const auto scored =
      change_score_rows(obs.timestamps, rows, cfg.window_for(modality));
  SessionScore out;
  out.session_id = session.session_id;
  out.subject_id = session.subject_id;
  out.modality = modality;
  out.timestamps = obs.timestamps;
  out.llr.resize(scored.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scored.size(); ++i) {
    out.llr[i] = risk_score(model.staircase, scored[i]);
    best = std::max(best, out.llr[i]);
  }
  out.max_score = scored.empty() ? 0.0 : best;
  return out;
}

struct FoldAudit {
  std::string test_subject;
  std::vector<std::string> train_subjects;
};

struct LosoResult {
  std::vector<SessionScore> scores;
  std::vector<FoldAudit> folds;
  int excluded_sessions = 0;
};

// Leave-one-subject-out evaluation for one modality. Fold seeds mix the fold
// index with a hash of the modality name so reruns are bit-identical.
inline LosoResult loso_evaluate(const std::vector<SessionRecord>& sessions,
                                const std::string& modality,
                                const RiskConfig& cfg = {}) {
  std::set<std::string> subject_set;
  for (const auto& s : sessions) subject_set.insert(s.subject_id);
  if (subject_set.size() < 2)
    throw std::invalid_argument("loso_evaluate: need at least 2 subjects");
  const std::vector<std::string> subjects(subject_set.begin(), subject_set.end());

  LosoResult result;
  for (const auto& s : sessions)
    if (s.modalities.count(modality) && !session_included(s, modality, cfg))
      ++result.excluded_sessions;

  for (std::size_t fold = 0; fold < subjects.size(); ++fold) {
    const std::string& test_subject = subjects[fold];
    FoldAudit audit;
    audit.test_subject = test_subject;
    for (const auto& s : subjects)
      if (s != test_subject) audit.train_subjects.push_back(s);
    result.folds.push_back(audit);

    const std::uint64_t seed = std::uint64_t(fold) ^ detail::hash_name(modality);
    const ModalityModel model =
        train_modality_model(sessions, modality, test_subject, seed, cfg);
    for (const auto& s : sessions) {
      if (s.subject_id != test_subject) continue;
      if (!session_included(s, modality, cfg)) continue;
      result.scores.push_back(score_session(s, modality, model, cfg));
    }
  }
  return result;
}

struct FusionConfig {
  int min_modalities = 2;
  bool average_maxima = false;
  double grid_s = 60.0;
};

// Session-level fusion: per-modality scores resampled to a shared grid with
// last-observation-carried-forward, then averaged pointwise; a modality
// contributes only once its first observation has arrived. The alternative
// variant averages per-modality maxima instead.
inline std::vector<SessionScore> fuse_sessions(
    const std::vector<SessionScore>& scores, const FusionConfig& cfg = {}) {
  std::map<std::string, std::vector<const SessionScore*>> by_session;
  for (const auto& s : scores)
    if (!s.timestamps.empty()) by_session[s.session_id].push_back(&s);

  std::vector<SessionScore> fused;
  for (const auto& [session_id, parts] : by_session) {
    if (int(parts.size()) < cfg.min_modalities) continue;
    SessionScore f;
    f.session_id = session_id;
    f.subject_id = parts.front()->subject_id;
    f.modality = "fused";
    if (cfg.average_maxima) {
      double acc = 0.0;
      double t0 = parts.front()->timestamps.front();
      for (const auto* p : parts) {
        acc += p->max_score;
        t0 = std::min(t0, p->timestamps.front());
      }
      f.max_score = acc / double(parts.size());
      f.timestamps = {t0};
      f.llr = {f.max_score};
      fused.push_back(std::move(f));
      continue;
    }
    double t0 = parts.front()->timestamps.front();
    double t1 = parts.front()->timestamps.back();
    for (const auto* p : parts) {
      t0 = std::min(t0, p->timestamps.front());
      t1 = std::max(t1, p->timestamps.back());
    }
    f.max_score = -std::numeric_limits<double>::infinity();
    for (double t = t0; t <= t1 + 1e-9; t += cfg.grid_s) {
      double acc = 0.0;
      int available = 0;
      for (const auto* p : parts) {
        const auto it = std::upper_bound(p->timestamps.begin(),
                                         p->timestamps.end(), t + 1e-9);
        if (it == p->timestamps.begin()) continue;  // not yet observed
        acc += p->llr[std::size_t(it - p->timestamps.begin()) - 1];
        ++available;
      }
      if (available == 0) continue;
      f.timestamps.push_back(t);
      f.llr.push_back(acc / double(available));
      f.max_score = std::max(f.max_score, f.llr.back());
    }
    fused.push_back(std::move(f));
  }
  return fused;
}

}  // namespace blastdose
