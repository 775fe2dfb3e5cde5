#pragma once
// Cohort-level statistics over session scores and dose summaries: the
// dose-response threshold sweep, metric similarity table, sensor ablation,
// per-feature direction checks, reaction-time trend testing, and the
// case-study crossing report.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "blastdose/dosimetry.hpp"
#include "blastdose/riskmodel.hpp"
#include "blastdose/stats.hpp"

namespace blastdose {

struct CorrelationResult {
  double rho = 0.0;
  std::size_t n = 0;
  double p_value = 1.0;
};

// Rank correlation with sample count attached; degenerate inputs throw, as
// the underlying test does.
inline CorrelationResult correlate(const std::vector<double>& x,
                                   const std::vector<double>& y) {
  const SpearmanResult s = spearman(x, y);
  return {s.rho, x.size(), s.p_value};
}

namespace detail {

// Grid cells report NaN instead of failing the whole table when one column
// is degenerate (for example, every session holding the same dose total).
inline double rho_or_nan(const std::vector<double>& x,
                         const std::vector<double>& y) {
  try {
    return spearman(x, y).rho;
  } catch (const std::invalid_argument&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace detail

struct SweepResult {
  // rho[metric][threshold] in kAllDoseMetrics / kDoseThresholdsDb order.
  std::array<std::array<double, 7>, 4> rho{};
  double duration_baseline_rho = std::numeric_limits<double>::quiet_NaN();
  int dropped_sessions = 0;  // unmatched between scores and doses
};

namespace detail {

// Elapsed-time observation stream on a one-minute grid spanning the union of
// a session's modality streams, in hours so magnitudes stay modest.
inline ObservationStream duration_stream(const SessionRecord& record) {
  double t0 = std::numeric_limits<double>::infinity();
  double t1 = -std::numeric_limits<double>::infinity();
  for (const auto& [name, obs] : record.modalities) {
    if (obs.timestamps.empty()) continue;
    t0 = std::min(t0, obs.timestamps.front());
    t1 = std::max(t1, obs.timestamps.back());
  }
  ObservationStream out;
  if (!(t0 < t1)) return out;
  for (double t = t0; t <= t1 + 1e-9; t += 60.0) {
    out.timestamps.push_back(t);
    out.rows.push_back({(t - t0) / 3600.0});
  }
  return out;
}

}  // namespace detail

// Baseline: the same staircase machinery trained on elapsed session time as
// the only feature. Returns the per-session maximum model score keyed by id;
// cohorts too degenerate to train yield an empty map.
inline std::map<std::string, double> duration_model_scores(
    const std::vector<SessionRecord>& records, const RiskConfig& cfg = {}) {
  std::vector<std::vector<double>> features;
  std::vector<double> labels;
  std::vector<std::pair<std::string, ObservationStream>> streams;
  for (const auto& r : records) {
    ObservationStream s = detail::duration_stream(r);
    if (s.rows.empty()) continue;
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      features.push_back(s.rows[i]);
      labels.push_back(dose_label_at(r, s.timestamps[i]));
    }
    streams.emplace_back(r.session_id, std::move(s));
  }
  std::map<std::string, double> out;
  if (features.empty()) return out;
  StaircaseModel model;
  try {
    model = train_staircase(features, labels, detail::hash_name("duration"),
                            cfg, "duration");
  } catch (const std::invalid_argument&) {
    return out;
  }
  for (const auto& [id, s] : streams) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& row : s.rows) best = std::max(best, risk_score(model, row));
    out[id] = best;
  }
  return out;
}

// Correlation of per-session maximum fused score against every cumulative
// dose total on the 4-metric x 7-threshold grid, plus the exposure-duration
// baseline. Sessions present on only one side are dropped (counted);
// discarded dose summaries are ignored.
inline SweepResult dose_response_sweep(const std::vector<SessionScore>& fused,
                                       const std::vector<SessionDose>& doses,
                                       const std::vector<SessionRecord>& records,
                                       const RiskConfig& cfg = {}) {
  std::map<std::string, double> score_by_id;
  for (const auto& f : fused) score_by_id[f.session_id] = f.max_score;
  std::map<std::string, const SessionDose*> dose_by_id;
  for (const auto& d : doses)
    if (!d.discarded) dose_by_id[d.session_id] = &d;

  std::vector<std::string> matched;
  for (const auto& [id, score] : score_by_id)
    if (dose_by_id.count(id)) matched.push_back(id);

  SweepResult out;
  out.dropped_sessions =
      int(score_by_id.size() + dose_by_id.size() - 2 * matched.size());
  if (matched.size() < 3)
    throw std::invalid_argument("dose_response_sweep: need >= 3 matched sessions");

  std::vector<double> scores;
  for (const auto& id : matched) scores.push_back(score_by_id.at(id));
  for (std::size_t m = 0; m < kAllDoseMetrics.size(); ++m) {
    for (std::size_t t = 0; t < kDoseThresholdsDb.size(); ++t) {
      std::vector<double> totals;
      for (const auto& id : matched)
        totals.push_back(dose_by_id.at(id)->totals[m][t]);
      out.rho[m][t] = detail::rho_or_nan(scores, totals);
    }
  }

  // Duration baseline against the canonical 160 dB blast count column.
  std::vector<SessionRecord> matched_records;
  for (const auto& r : records)
    if (std::find(matched.begin(), matched.end(), r.session_id) != matched.end())
      matched_records.push_back(r);
  const auto duration_scores = duration_model_scores(matched_records, cfg);
  std::vector<double> ds, dt;
  for (const auto& id : matched) {
    const auto it = duration_scores.find(id);
    if (it == duration_scores.end()) continue;
    ds.push_back(it->second);
    dt.push_back(dose_by_id.at(id)->totals[0][4]);
  }
  out.duration_baseline_rho = ds.size() >= 3
                                  ? detail::rho_or_nan(ds, dt)
                                  : std::numeric_limits<double>::quiet_NaN();
  return out;
}

// Pairwise rank correlation among the four cumulative totals at one
// threshold. Symmetric with an exact unit diagonal.
inline std::array<std::array<double, 4>, 4> metric_similarity(
    const std::vector<SessionDose>& doses, std::size_t threshold_index) {
  std::vector<const SessionDose*> kept;
  for (const auto& d : doses)
    if (!d.discarded) kept.push_back(&d);
  if (kept.size() < 3)
    throw std::invalid_argument("metric_similarity: need >= 3 sessions");
  std::array<std::vector<double>, 4> columns;
  for (const auto* d : kept)
    for (std::size_t m = 0; m < 4; ++m)
      columns[m].push_back(d->totals[m][threshold_index]);
  std::array<std::array<double, 4>, 4> table{};
  for (std::size_t i = 0; i < 4; ++i) {
    table[i][i] = 1.0;
    for (std::size_t j = i + 1; j < 4; ++j) {
      const double r = detail::rho_or_nan(columns[i], columns[j]);
      table[i][j] = r;
      table[j][i] = r;
    }
  }
  return table;
}

struct AblationConfig {
  std::string name;
  std::vector<std::string> modalities;
  // A session qualifies only if it carries every one of these (saccades need
  // the dual-channel recording).
  std::vector<std::string> required;
};

inline std::vector<AblationConfig> standard_ablation_configs() {
  return {
      {"accel", {"gait", "balance"}, {}},
      {"eog1", {"blink"}, {}},
      {"eog2", {"blink", "saccade"}, {"saccade"}},
      {"accel_eog1", {"gait", "balance", "blink"}, {}},
      {"accel_eog2", {"gait", "balance", "blink", "saccade"}, {"saccade"}},
  };
}

struct AblationRow {
  std::string name;
  bool available = false;
  CorrelationResult corr;
};

// Re-runs fusion restricted to each sensor configuration and correlates the
// per-session maxima with one dose column. Single-modality fusion is allowed
// here so sensor subsets stay comparable.
inline std::vector<AblationRow> ablation(
    const std::vector<SessionScore>& modality_scores,
    const std::vector<SessionDose>& doses, std::size_t metric_index = 0,
    std::size_t threshold_index = 4,
    const std::vector<AblationConfig>& configs = standard_ablation_configs()) {
  std::map<std::string, double> dose_by_id;
  for (const auto& d : doses)
    if (!d.discarded)
      dose_by_id[d.session_id] = d.totals[metric_index][threshold_index];
  std::map<std::string, std::vector<std::string>> session_modalities;
  for (const auto& s : modality_scores)
    session_modalities[s.session_id].push_back(s.modality);

  std::vector<AblationRow> rows;
  for (const auto& config : configs) {
    AblationRow row;
    row.name = config.name;
    std::vector<SessionScore> subset;
    for (const auto& s : modality_scores) {
      if (std::find(config.modalities.begin(), config.modalities.end(),
                    s.modality) == config.modalities.end())
        continue;
      const auto& have = session_modalities[s.session_id];
      bool qualified = true;
      for (const auto& req : config.required)
        if (std::find(have.begin(), have.end(), req) == have.end())
          qualified = false;
      if (qualified) subset.push_back(s);
    }
    FusionConfig fusion;
    fusion.min_modalities = 1;
    const auto fused = fuse_sessions(subset, fusion);
    std::vector<double> scores, totals;
    for (const auto& f : fused) {
      const auto it = dose_by_id.find(f.session_id);
      if (it == dose_by_id.end()) continue;
      scores.push_back(f.max_score);
      totals.push_back(it->second);
    }
    if (scores.size() >= 3) {
      row.available = true;
      row.corr.rho = detail::rho_or_nan(scores, totals);
      row.corr.n = scores.size();
      try {
        row.corr.p_value = spearman(scores, totals).p_value;
      } catch (const std::invalid_argument&) {
        row.corr.p_value = std::numeric_limits<double>::quiet_NaN();
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// The raw gait row index summarizing the eigenspectrum: eigenvalue rank 10
// (index 9) within the first delay-scale block.
inline constexpr std::size_t kGaitDirectionColumn = 9;

// Pools (change score, accumulating dose) pairs across sessions for one
// modality column; the correlation of the two is the feature's direction.
// Uses the instantaneous standardized change, which is serially uncorrelated
// under a stationary feature, so pooled null correlations stay near zero; the
// smoothed variant feeds the risk model, not this analysis.
inline std::pair<std::vector<double>, std::vector<double>> pooled_feature_dose(
    const std::vector<SessionRecord>& records, const std::string& modality,
    std::size_t column, int window_count) {
  std::pair<std::vector<double>, std::vector<double>> out;
  for (const auto& r : records) {
    const auto it = r.modalities.find(modality);
    if (it == r.modalities.end() || it->second.rows.empty()) continue;
    if (column >= it->second.rows[0].size())
      throw std::invalid_argument("pooled_feature_dose: column out of range");
    FeatureStream f;
    f.timestamps = it->second.timestamps;
    f.values.reserve(it->second.rows.size());
    for (const auto& row : it->second.rows) f.values.push_back(row[column]);
    const ScoreSeries s = score_stream(f, window_count);
    for (std::size_t i = 0; i < s.z_instant.size(); ++i) {
      out.first.push_back(s.z_instant[i]);
      out.second.push_back(dose_label_at(r, f.timestamps[i]));
    }
  }
  return out;
}

struct ReactionTimeTrend {
  double slope_ms_per_day = 0.0;
  double p_value = 1.0;
  bool flagged = false;  // p < 1e-3 and slope strictly positive
};

// Least-squares trend over reaction times; flags only a significant
// *positive* drift. Requires at least five points and non-constant times.
inline ReactionTimeTrend anam_trend(const std::vector<double>& days,
                                    const std::vector<double>& reaction_ms) {
  if (days.size() != reaction_ms.size())
    throw std::invalid_argument("anam_trend: length mismatch");
  if (days.size() < 5)
    throw std::invalid_argument("anam_trend: need >= 5 points");
  const TrendResult t = linear_trend(days, reaction_ms);
  ReactionTimeTrend out;
  out.slope_ms_per_day = t.slope;
  out.p_value = t.p_value;
  out.flagged = t.p_value < 1e-3 && t.slope > 0.0;
  return out;
}

// Accumulated dose at time t under the step convention (value of the nearest
// preceding sample, zero before the first).
inline double dose_value_at(const DoseSeries& series, double t) {
  const auto it = std::upper_bound(series.timestamps.begin(),
                                   series.timestamps.end(), t);
  if (it == series.timestamps.begin()) return 0.0;
  return series
      .cumulative_values[std::size_t(it - series.timestamps.begin()) - 1];
}

struct CaseStudyRow {
  std::string session_id;
  bool crossed = false;
  double crossing_time = 0.0;
  // Dose at the crossing per metric, kAllDoseMetrics order.
  std::array<double, 4> dose_at_crossing{};
};

// For each fused session, the first time the score reaches the alert level
// and the accumulated dose (per metric) at that moment. Sessions that never
// cross still get a row.
inline std::vector<CaseStudyRow> case_study_report(
    const std::vector<SessionScore>& fused,
    const std::map<std::string, std::array<DoseSeries, 4>>& dose_series,
    double level = 2.0) {
  std::vector<const SessionScore*> ordered;
  for (const auto& f : fused) ordered.push_back(&f);
  std::sort(ordered.begin(), ordered.end(),
            [](const SessionScore* a, const SessionScore* b) {
              return a->session_id < b->session_id;
            });
  std::vector<CaseStudyRow> rows;
  for (const auto* f : ordered) {
    CaseStudyRow row;
    row.session_id = f->session_id;
    for (std::size_t i = 0; i < f->llr.size(); ++i) {
      if (f->llr[i] >= level) {
        row.crossed = true;
        row.crossing_time = f->timestamps[i];
        break;
      }
    }
    if (row.crossed) {
      const auto it = dose_series.find(f->session_id);
      if (it != dose_series.end())
        for (std::size_t m = 0; m < 4; ++m)
          row.dose_at_crossing[m] = dose_value_at(it->second[m], row.crossing_time);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace blastdose
