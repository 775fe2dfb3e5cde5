#pragma once
// Glue between raw per-session signals and the model layer: runs the
// detectors and dose accumulation for one session and packages the feature
// streams as observation records for training, scoring, and analysis.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "blastdose/changescore.hpp"
#include "blastdose/dosimetry.hpp"
#include "blastdose/eog.hpp"
#include "blastdose/motion.hpp"
#include "blastdose/riskmodel.hpp"
#include "blastdose/synth.hpp"

namespace blastdose {

struct SessionFeatures {
  std::string session_id;
  std::string subject_id;
  bool dual_eog = false;
  std::vector<EventMetrics> events;  // artifacts included, input order
  SessionDose dose;                  // summary over non-artifact events
  std::vector<BlinkEvent> blinks;
  std::vector<SaccadeEvent> saccades;  // empty without a horizontal channel
  SessionMotionFeatures motion;
};

inline std::vector<EventMetrics> clean_events(
    const std::vector<EventMetrics>& all) {
  std::vector<EventMetrics> out;
  for (const auto& e : all)
    if (!e.is_artifact) out.push_back(e);
  return out;
}

// Full single-session extraction: event metrics and dose summary, blink and
// saccade detection behind the artifact masks, and motion features.
inline SessionFeatures extract_session(const SyntheticSession& s,
                                       const DoseConfig& dose_cfg = {},
                                       const EogConfig& eog_cfg = {},
                                       const MotionConfig& motion_cfg = {}) {
  SessionFeatures out;
  out.session_id = s.session_id;
  out.subject_id = s.subject_id;
  out.dual_eog = s.dual_eog;

  for (const auto& ev : s.events)
    out.events.push_back(event_metrics(ev, dose_cfg));
  out.dose = session_summary(s.session_id, s.subject_id, out.events, {},
                             dose_cfg);

  const SampledSignal narrow = bandpass(s.veog, 0.1, 10.0, 3);
  const SampledSignal wide = bandpass(s.veog, 0.1, 25.0, 3);
  const std::vector<bool> vmask = artifact_mask(narrow, eog_cfg);
  out.blinks = detect_blinks(narrow, wide, vmask, eog_cfg);
  if (s.dual_eog && !s.heog.samples.empty()) {
    const SampledSignal h10 = bandpass(s.heog, 0.1, 10.0, 3);
    const std::vector<bool> hmask = artifact_mask(h10, eog_cfg);
    out.saccades = detect_saccades(narrow, h10, vmask, hmask, eog_cfg);
  }

  out.motion = extract_session_features(s.accel, motion_cfg);
  return out;
}

// Accumulating dose series over the session's non-artifact events.
inline DoseSeries session_dose_series(const SessionFeatures& f, DoseMetric kind,
                                      double threshold_db) {
  return accumulate_dose(clean_events(f.events), {}, kind, threshold_db);
}

// Observation record for the model layer. Feature streams: raw gait
// eigenspectra (vector rows), per-frame path length, blink durations, and
// saccade amplitudes. Training labels are the accumulated blast count above
// `label_threshold_db`.
inline SessionRecord to_session_record(const SessionFeatures& f,
                                       double label_threshold_db = 160.0) {
  SessionRecord r;
  r.session_id = f.session_id;
  r.subject_id = f.subject_id;

  ObservationStream gait;
  for (const auto& g : f.motion.gait) {
    gait.timestamps.push_back(g.frame_time);
    gait.rows.push_back(g.raw_tde);
  }
  if (!gait.timestamps.empty()) r.modalities["gait"] = std::move(gait);

  ObservationStream balance;
  for (const auto& b : f.motion.balance) {
    balance.timestamps.push_back(b.frame_time);
    balance.rows.push_back({b.path_length});
  }
  if (!balance.timestamps.empty()) r.modalities["balance"] = std::move(balance);

  ObservationStream blink;
  for (const auto& b : f.blinks) {
    blink.timestamps.push_back(b.peak_time);
    blink.rows.push_back({b.duration_ms});
  }
  if (!blink.timestamps.empty()) r.modalities["blink"] = std::move(blink);

  ObservationStream saccade;
  for (const auto& sc : f.saccades) {
    saccade.timestamps.push_back(sc.onset_time);
    saccade.rows.push_back({sc.amplitude});
  }
  if (!saccade.timestamps.empty())
    r.modalities["saccade"] = std::move(saccade);

  const DoseSeries labels =
      session_dose_series(f, DoseMetric::BlastCount, label_threshold_db);
  r.dose_times = labels.timestamps;
  r.dose_values = labels.cumulative_values;
  return r;
}

// Change-score series for every scalar column of every modality, keyed
// "modality" for scalars and "modality[col]" for vector streams.
inline std::map<std::string, ScoreSeries> change_scores(
    const SessionRecord& r, const RiskConfig& cfg = {}) {
  std::map<std::string, ScoreSeries> out;
  for (const auto& [name, stream] : r.modalities) {
    if (stream.rows.empty()) continue;
    const std::size_t dim = stream.rows.front().size();
    const int window = cfg.window_for(name);
    for (std::size_t c = 0; c < dim; ++c) {
      FeatureStream fs;
      fs.timestamps = stream.timestamps;
      fs.values.reserve(stream.rows.size());
      for (const auto& row : stream.rows) fs.values.push_back(row[c]);
      const std::string key =
          dim == 1 ? name : name + "[" + std::to_string(c) + "]";
      out[key] = score_stream(fs, window);
    }
  }
  return out;
}

}  // namespace blastdose
