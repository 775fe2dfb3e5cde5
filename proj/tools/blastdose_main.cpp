// Command-line driver for the blast dose-response pipeline.
//
// The pipeline runs as a chain of stages, each reading the previous stage's
// artifacts from a shared output root and writing its own:
//
//   simulate -> dose -------+-> change
//            -> features ---+-> train -> score -> fuse -> correlate -> report
//
// Every stage writes a manifest (config hash + input/output digests) so a run
// can be audited and reproduced. Identical configuration and seeds produce
// byte-identical artifacts.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <blastdose/analysis.hpp>
#include <blastdose/changescore.hpp>
#include <blastdose/dosimetry.hpp>
#include <blastdose/eog.hpp>
#include <blastdose/io.hpp>
#include <blastdose/motion.hpp>
#include <blastdose/pipeline.hpp>
#include <blastdose/riskmodel.hpp>
#include <blastdose/signal.hpp>
#include <blastdose/stats.hpp>
#include <blastdose/synth.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace blastdose;

namespace {

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string out;  // output root; flag > env BLASTDOSE_OUT > config file
  std::uint64_t seed = 1;
  int jobs = 1;
  std::vector<double> thresholds_db = {140, 145, 150, 155, 160, 165, 170};
  std::string fusion = "series";  // "series" or "maxima"
  std::string model_set = "folds";  // "folds" (held-out) or "global"
  double label_threshold_db = 160.0;
  double alert_level = 2.0;
  // Cohort generation.
  int subjects = 28;
  int base_sessions = 3;
  int extra_session_subjects = 7;
  double session_duration_s = 4000.0;
  double dual_eog_fraction = 0.40;
  bool couple = true;
  int case_subject = -1;
  std::vector<int> anam_drifters;
  bool anam_drifters_set = false;
  // Session inclusion gates for model training and scoring.
  double min_session_hours = 1.0;
  int min_frames = 25;
};

[[noreturn]] void die(int code, const std::string& msg) {
  std::fprintf(stderr, "error: %s\n", msg.c_str());
  std::exit(code);
}

// Missing upstream artifacts abort with the artifact path and the stage that
// produces it, so a partial pipeline points the user at the right command.
fs::path require_artifact(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p))
    die(2, "missing artifact '" + p.string() + "'; run 'blastdose " +
               producer + "' first");
  return p;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += io::format_double(v[i]);
  }
  return s;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

// Fixed-order key=value rendering: the manifest config hash is the FNV-1a of
// this string, so identical configurations hash identically across runs.
std::string canonical_config(const RunConfig& c) {
  std::string s;
  const auto kv = [&](const char* k, const std::string& v) {
    s += k;
    s += "=";
    s += v;
    s += "\n";
  };
  // jobs is deliberately absent: worker count is an execution detail that
  // never changes artifact content, so it must not change the config hash.
  kv("seed", std::to_string(c.seed));
  kv("thresholds_db", join_doubles(c.thresholds_db));
  kv("fusion", c.fusion);
  kv("model_set", c.model_set);
  kv("label_threshold_db", io::format_double(c.label_threshold_db));
  kv("alert_level", io::format_double(c.alert_level));
  kv("subjects", std::to_string(c.subjects));
  kv("base_sessions", std::to_string(c.base_sessions));
  kv("extra_session_subjects", std::to_string(c.extra_session_subjects));
  kv("session_duration_s", io::format_double(c.session_duration_s));
  kv("dual_eog_fraction", io::format_double(c.dual_eog_fraction));
  kv("couple", c.couple ? "1" : "0");
  kv("case_subject", std::to_string(c.case_subject));
  kv("anam_drifters", join_ints(c.anam_drifters));
  kv("min_session_hours", io::format_double(c.min_session_hours));
  kv("min_frames", std::to_string(c.min_frames));
  return s;
}

std::string config_hash(const RunConfig& c, const std::string& stage) {
  const std::string s = canonical_config(c) + "stage=" + stage + "\n";
  return io::hex64(fnv1a64(s.data(), s.size()));
}

void apply_config_file(RunConfig* cfg, const fs::path& path) {
  if (!fs::exists(path)) die(2, "config file not found: " + path.string());
  json j;
  try {
    j = io::read_json(path);
  } catch (const std::exception& e) {
    die(2, "config file " + path.string() + ": " + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "out")
      cfg->out = value.get<std::string>();
    else if (key == "seed")
      cfg->seed = value.get<std::uint64_t>();
    else if (key == "jobs")
      cfg->jobs = value.get<int>();
    else if (key == "thresholds_db")
      cfg->thresholds_db = value.get<std::vector<double>>();
    else if (key == "fusion")
      cfg->fusion = value.get<std::string>();
    else if (key == "model_set")
      cfg->model_set = value.get<std::string>();
    else if (key == "label_threshold_db")
      cfg->label_threshold_db = value.get<double>();
    else if (key == "alert_level")
      cfg->alert_level = value.get<double>();
    else if (key == "subjects")
      cfg->subjects = value.get<int>();
    else if (key == "base_sessions")
      cfg->base_sessions = value.get<int>();
    else if (key == "extra_session_subjects")
      cfg->extra_session_subjects = value.get<int>();
    else if (key == "session_duration_s")
      cfg->session_duration_s = value.get<double>();
    else if (key == "dual_eog_fraction")
      cfg->dual_eog_fraction = value.get<double>();
    else if (key == "couple")
      cfg->couple = value.get<bool>();
    else if (key == "case_subject")
      cfg->case_subject = value.get<int>();
    else if (key == "anam_drifters") {
      cfg->anam_drifters = value.get<std::vector<int>>();
      cfg->anam_drifters_set = true;
    } else if (key == "min_session_hours")
      cfg->min_session_hours = value.get<double>();
    else if (key == "min_frames")
      cfg->min_frames = value.get<int>();
    else
      die(2, "config file " + path.string() + ": unknown key '" + key + "'");
  }
}

std::optional<std::size_t> grid_threshold_index(double threshold_db) {
  for (std::size_t i = 0; i < kDoseThresholdsDb.size(); ++i)
    if (std::abs(kDoseThresholdsDb[i] - threshold_db) < 1e-9) return i;
  return std::nullopt;
}

void validate_config(const RunConfig& c) {
  if (c.jobs < 1) die(2, "--jobs must be >= 1");
  if (c.fusion != "series" && c.fusion != "maxima")
    die(2, "--fusion must be 'series' or 'maxima'");
  if (c.model_set != "folds" && c.model_set != "global")
    die(2, "--model-set must be 'folds' or 'global'");
  if (c.thresholds_db.empty()) die(2, "--threshold-db needs at least one value");
  for (std::size_t i = 1; i < c.thresholds_db.size(); ++i)
    if (!(c.thresholds_db[i] > c.thresholds_db[i - 1]))
      die(2, "--threshold-db values must be strictly ascending");
  for (double t : c.thresholds_db)
    if (t < 100.0 || t > 200.0)
      die(2, "--threshold-db values must lie in [100, 200] dB SPL");
  bool label_in_list = false;
  for (double t : c.thresholds_db)
    if (std::abs(t - c.label_threshold_db) < 1e-9) label_in_list = true;
  if (!label_in_list)
    die(2, "--label-threshold must be one of the --threshold-db values");
  if (!grid_threshold_index(c.label_threshold_db))
    die(2, "--label-threshold must lie on the summary grid (140..170 by 5)");
  if (c.dual_eog_fraction < 0.0 || c.dual_eog_fraction > 1.0)
    die(2, "--dual-fraction must lie in [0, 1]");
  if (c.min_session_hours < 0.0) die(2, "--min-session-hours must be >= 0");
  if (c.min_frames < 1) die(2, "--min-frames must be >= 1");
}

RiskConfig risk_config(const RunConfig& c) {
  RiskConfig rc;
  rc.min_session_hours = c.min_session_hours;
  rc.min_frames = c.min_frames;
  return rc;
}

// ---------------------------------------------------------------------------
// Ordered parallelism: compute slots concurrently in blocks of `jobs`, then
// commit results strictly in index order so outputs stay deterministic.
// ---------------------------------------------------------------------------

template <typename Compute, typename Commit>
void for_each_ordered(std::size_t n, int jobs, Compute compute, Commit commit) {
  const std::size_t width = std::size_t(std::max(1, jobs));
  if (width <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      compute(i);
      commit(i);
    }
    return;
  }
  for (std::size_t base = 0; base < n; base += width) {
    const std::size_t end = std::min(n, base + width);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(end - base);
    for (std::size_t i = base; i < end; ++i)
      pool.emplace_back([&, i] {
        try {
          compute(i);
        } catch (...) {
          errors[i - base] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (std::size_t i = base; i < end; ++i) commit(i);
  }
}

// ---------------------------------------------------------------------------
// Cohort index
// ---------------------------------------------------------------------------

struct SessionEntry {
  std::string session_id;
  std::string subject_id;
  bool dual_eog = false;
  double duration_s = 0.0;
};

struct CohortIndex {
  std::vector<std::string> subjects;
  std::vector<SessionEntry> sessions;
  std::vector<int> anam_drifters;
};

fs::path cohort_json_path(const fs::path& root) {
  return root / "cohort" / "cohort.json";
}

fs::path session_dir(const fs::path& root, const std::string& session_id) {
  return root / "cohort" / "sessions" / session_id;
}

CohortIndex read_cohort_index(const fs::path& root) {
  const fs::path p = require_artifact(cohort_json_path(root), "simulate");
  const json j = io::read_json(p);
  CohortIndex idx;
  for (const auto& s : j.at("subjects"))
    idx.subjects.push_back(s.at("subject_id").get<std::string>());
  for (const auto& s : j.at("sessions")) {
    SessionEntry e;
    e.session_id = s.at("session_id").get<std::string>();
    e.subject_id = s.at("subject_id").get<std::string>();
    e.dual_eog = s.at("dual_eog").get<bool>();
    e.duration_s = s.at("duration_s").get<double>();
    idx.sessions.push_back(e);
  }
  if (j.contains("anam_drifters"))
    idx.anam_drifters = j.at("anam_drifters").get<std::vector<int>>();
  return idx;
}

// ---------------------------------------------------------------------------
// Signal blobs: recorded event waveforms and the three-axis accelerometer
// trace are packed into single float32 files with a JSON index.
// ---------------------------------------------------------------------------

json write_events_blob(const fs::path& dir,
                       const std::vector<BlastEvent>& events) {
  std::vector<double> packed;
  json index = json::array();
  for (const auto& ev : events) {
    json e;
    e["event_time"] = ev.event_time;
    const auto channel = [&](const SampledSignal& ch) {
      json c;
      c["offset"] = packed.size();
      c["n"] = ch.samples.size();
      c["sample_rate_hz"] = ch.sample_rate_hz;
      c["start_time"] = ch.start_time;
      packed.insert(packed.end(), ch.samples.begin(), ch.samples.end());
      return c;
    };
    e["low_gain"] = channel(ev.low_gain_channel);
    e["high_gain"] = channel(ev.high_gain_channel);
    index.push_back(e);
  }
  io::write_f32(dir / "events.f32", packed);
  json meta;
  meta["file"] = "events.f32";
  meta["events"] = index;
  return meta;
}

std::vector<BlastEvent> read_events_blob(const fs::path& dir,
                                         const json& meta) {
  const std::vector<double> packed =
      io::read_f32(dir / meta.at("file").get<std::string>());
  std::vector<BlastEvent> events;
  for (const auto& e : meta.at("events")) {
    BlastEvent ev;
    ev.event_time = e.at("event_time").get<double>();
    const auto channel = [&](const json& c) {
      SampledSignal s;
      const std::size_t off = c.at("offset").get<std::size_t>();
      const std::size_t n = c.at("n").get<std::size_t>();
      if (off + n > packed.size())
        throw std::runtime_error("event waveform index out of range");
      s.samples.assign(packed.begin() + off, packed.begin() + off + n);
      s.sample_rate_hz = c.at("sample_rate_hz").get<double>();
      s.start_time = c.at("start_time").get<double>();
      return s;
    };
    ev.low_gain_channel = channel(e.at("low_gain"));
    ev.high_gain_channel = channel(e.at("high_gain"));
    events.push_back(std::move(ev));
  }
  return events;
}

json write_accel_blob(const fs::path& dir, const AccelSignal& a) {
  std::vector<double> packed;
  packed.reserve(3 * a.size());
  for (int ax = 0; ax < 3; ++ax)
    packed.insert(packed.end(), a.axes[ax].begin(), a.axes[ax].end());
  io::write_f32(dir / "accel.f32", packed);
  json meta;
  meta["file"] = "accel.f32";
  meta["sample_rate_hz"] = a.sample_rate_hz;
  meta["start_time"] = a.start_time;
  meta["n"] = a.size();
  return meta;
}

AccelSignal read_accel_blob(const fs::path& dir, const json& meta) {
  const std::vector<double> packed =
      io::read_f32(dir / meta.at("file").get<std::string>());
  AccelSignal a;
  a.sample_rate_hz = meta.at("sample_rate_hz").get<double>();
  a.start_time = meta.at("start_time").get<double>();
  const std::size_t n = meta.at("n").get<std::size_t>();
  if (packed.size() != 3 * n)
    throw std::runtime_error("accel blob size mismatch");
  for (int ax = 0; ax < 3; ++ax)
    a.axes[ax].assign(packed.begin() + ax * n, packed.begin() + (ax + 1) * n);
  return a;
}

// ---------------------------------------------------------------------------
// Reading per-session artifacts back into pipeline structures
// ---------------------------------------------------------------------------

fs::path dose_json_path(const fs::path& root, const std::string& sid) {
  return root / "dose" / (sid + ".json");
}

fs::path features_csv_path(const fs::path& root, const std::string& sid) {
  return root / "features" / (sid + ".csv");
}

struct SessionDoseArtifacts {
  SessionDose dose;
  std::vector<DoseSeries> series;
};

SessionDoseArtifacts read_dose_artifacts(const fs::path& root,
                                         const std::string& sid) {
  const json j = io::read_json(require_artifact(dose_json_path(root, sid), "dose"));
  SessionDoseArtifacts out;
  out.dose.session_id = j.at("session_id").get<std::string>();
  out.dose.subject_id = j.at("subject_id").get<std::string>();
  out.dose.artifact_count = j.at("artifact_count").get<int>();
  out.dose.discarded = j.at("discarded").get<bool>();
  out.dose.totals = io::dose_totals_from_json(j.at("totals"));
  for (const auto& s : j.at("series"))
    out.series.push_back(io::dose_series_from_json(s));
  return out;
}

const DoseSeries* find_series(const std::vector<DoseSeries>& series,
                              DoseMetric kind, double threshold_db) {
  for (const auto& s : series)
    if (s.kind == kind && std::abs(s.threshold_db_spl - threshold_db) < 1e-9)
      return &s;
  return nullptr;
}

// Feature CSVs hold one row per frame: stream name, timestamp, value count,
// then the values. Gait rows carry the full embedding vector; the other
// streams are scalar.
std::map<std::string, ObservationStream> read_feature_streams(
    const fs::path& csv) {
  const auto rows = io::read_csv(csv);
  std::map<std::string, ObservationStream> streams;
  for (std::size_t r = 1; r < rows.size(); ++r) {  // rows[0] is the header
    const auto& row = rows[r];
    if (row.size() < 4)
      throw std::runtime_error("feature row too short in " + csv.string());
    const std::string& name = row[0];
    const double t = io::parse_double(row[1]);
    const std::size_t n = std::size_t(std::stoul(row[2]));
    if (row.size() != 3 + n)
      throw std::runtime_error("feature row width mismatch in " + csv.string());
    std::vector<double> values(n);
    for (std::size_t k = 0; k < n; ++k) values[k] = io::parse_double(row[3 + k]);
    auto& stream = streams[name];
    stream.timestamps.push_back(t);
    stream.rows.push_back(std::move(values));
  }
  return streams;
}

// A session record is rebuilt from the features stage plus the dose stage's
// cumulative event count at the label threshold. Sessions whose dose summary
// was discarded for excess artifacts return nullopt and drop out of training,
// scoring, and the analyses.
std::optional<SessionRecord> load_record(const fs::path& root,
                                         const SessionEntry& entry,
                                         double label_threshold_db,
                                         bool need_labels) {
  SessionRecord rec;
  rec.session_id = entry.session_id;
  rec.subject_id = entry.subject_id;
  rec.modalities =
      read_feature_streams(require_artifact(features_csv_path(root, entry.session_id), "features"));
  if (need_labels) {
    const SessionDoseArtifacts dose = read_dose_artifacts(root, entry.session_id);
    if (dose.dose.discarded) return std::nullopt;
    const DoseSeries* label =
        find_series(dose.series, DoseMetric::BlastCount, label_threshold_db);
    if (!label)
      throw std::runtime_error(
          "dose artifact for " + entry.session_id +
          " lacks a blast-count series at the label threshold; rerun "
          "'blastdose dose' with a matching --threshold-db list");
    rec.dose_times = label->timestamps;
    rec.dose_values = label->cumulative_values;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Stage: simulate
// ---------------------------------------------------------------------------

CohortConfig cohort_config(const RunConfig& c) {
  CohortConfig syn;
  syn.master_seed = c.seed;
  syn.n_subjects = c.subjects;
  syn.base_sessions = c.base_sessions;
  syn.extra_session_subjects = c.extra_session_subjects;
  syn.session_duration_s = c.session_duration_s;
  syn.dual_eog_fraction = c.dual_eog_fraction;
  syn.couple = c.couple;
  syn.case_subject = c.case_subject;
  return syn;
}

json truth_to_json(const SessionTruth& t) {
  json j;
  j["supra_times"] = t.supra_times;
  j["final_drift"] = t.final_drift;
  j["label_times"] = t.label_times;
  j["label_values"] = t.label_values;
  j["dose_totals"] = io::dose_totals_to_json(t.dose_totals);
  json blinks = json::array();
  for (const auto& b : t.blinks)
    blinks.push_back({{"time_s", b.time_s},
                      {"duration_ms", b.duration_ms},
                      {"masked", b.masked}});
  j["blinks"] = blinks;
  json saccades = json::array();
  for (const auto& s : t.saccades)
    saccades.push_back({{"time_s", s.time_s}, {"amplitude_mv", s.amplitude_mv}});
  j["saccades"] = saccades;
  return j;
}

int cmd_simulate(const RunConfig& cfg, const fs::path& root) {
  const CohortConfig syn = cohort_config(cfg);
  const std::vector<PlannedSession> plans = plan_cohort(syn);

  std::vector<fs::path> outputs;
  std::vector<std::optional<SyntheticSession>> slots(plans.size());
  for_each_ordered(
      plans.size(), cfg.jobs,
      [&](std::size_t i) {
        slots[i] = gen_session(plans[i].profile, plans[i].plan);
      },
      [&](std::size_t i) {
        const SyntheticSession& s = *slots[i];
        const fs::path dir = session_dir(root, s.session_id);
        fs::create_directories(dir);
        json signals;
        signals["session_id"] = s.session_id;
        signals["subject_id"] = s.subject_id;
        signals["dual_eog"] = s.dual_eog;
        signals["veog"] = io::write_signal(dir, "veog", s.veog);
        outputs.push_back(dir / "veog.f32");
        if (s.dual_eog) {
          signals["heog"] = io::write_signal(dir, "heog", s.heog);
          outputs.push_back(dir / "heog.f32");
        }
        signals["accel"] = write_accel_blob(dir, s.accel);
        outputs.push_back(dir / "accel.f32");
        signals["events"] = write_events_blob(dir, s.events);
        outputs.push_back(dir / "events.f32");
        io::write_json(dir / "signals.json", signals);
        outputs.push_back(dir / "signals.json");
        io::write_json(dir / "truth.json", truth_to_json(s.truth));
        outputs.push_back(dir / "truth.json");
        slots[i].reset();
      });

  // Cohort index: subject roster, session roster, and which subjects carry a
  // drifting reaction-time series (defaults to the case subject when set).
  std::vector<int> drifters = cfg.anam_drifters;
  if (!cfg.anam_drifters_set && cfg.case_subject >= 0)
    drifters = {cfg.case_subject};
  json index;
  index["master_seed"] = syn.master_seed;
  index["couple"] = syn.couple;
  index["case_subject"] = syn.case_subject;
  index["anam_drifters"] = drifters;
  json subjects = json::array();
  std::set<std::string> seen;
  for (const auto& p : plans)
    if (seen.insert(p.profile.subject_id).second)
      subjects.push_back(
          {{"subject_id", p.profile.subject_id},
           {"susceptibility", p.profile.susceptibility},
           {"coupling_threshold_db", p.profile.coupling_threshold_db},
           {"onset_count", p.profile.onset_count}});
  index["subjects"] = subjects;
  json sessions = json::array();
  for (const auto& p : plans)
    sessions.push_back({{"session_id", p.plan.session_id},
                        {"subject_id", p.profile.subject_id},
                        {"dual_eog", p.plan.dual_eog},
                        {"duration_s", p.plan.duration_s}});
  index["sessions"] = sessions;
  io::write_json(cohort_json_path(root), index);
  outputs.push_back(cohort_json_path(root));

  const std::vector<ReactionSeries> anam = gen_anam(syn, drifters);
  io::CsvWriter anam_csv(root / "cohort" / "anam.csv");
  anam_csv.row({"subject_id", "day", "reaction_ms"});
  for (const auto& r : anam)
    for (std::size_t i = 0; i < r.days.size(); ++i)
      anam_csv.row({r.subject_id, io::format_double(r.days[i]),
                    io::format_double(r.reaction_ms[i])});
  outputs.push_back(root / "cohort" / "anam.csv");

  io::write_manifest(root, "simulate", config_hash(cfg, "simulate"), {}, outputs);
  std::printf("simulate: %zu sessions, %d subjects -> %s\n", plans.size(),
              syn.n_subjects, (root / "cohort").string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// Stage: dose
// ---------------------------------------------------------------------------

int cmd_dose(const RunConfig& cfg, const fs::path& root) {
  const CohortIndex idx = read_cohort_index(root);
  const DoseConfig dose_cfg;

  std::vector<fs::path> inputs = {cohort_json_path(root)};
  std::vector<fs::path> outputs;
  io::CsvWriter summary(root / "dose" / "summary.csv");
  std::vector<std::string> header = {"session_id", "subject_id",
                                     "artifact_count", "discarded"};
  for (DoseMetric m : kAllDoseMetrics)
    for (double thr : kDoseThresholdsDb) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s_%.0f", dose_metric_name(m), thr);
      header.push_back(buf);
    }
  summary.row(header);

  struct Slot {
    json out;
    std::vector<std::string> summary_row;
  };
  std::vector<Slot> slots(idx.sessions.size());
  for_each_ordered(
      idx.sessions.size(), cfg.jobs,
      [&](std::size_t i) {
        const SessionEntry& e = idx.sessions[i];
        const fs::path dir = session_dir(root, e.session_id);
        const json signals =
            io::read_json(require_artifact(dir / "signals.json", "simulate"));
        const std::vector<BlastEvent> events =
            read_events_blob(dir, signals.at("events"));

        std::vector<EventMetrics> metrics;
        metrics.reserve(events.size());
        for (const auto& ev : events)
          metrics.push_back(event_metrics(ev, dose_cfg));
        const SessionDose dose = session_summary(e.session_id, e.subject_id,
                                                 metrics, {}, dose_cfg);
        std::vector<EventMetrics> clean;
        for (const auto& m : metrics)
          if (!m.is_artifact) clean.push_back(m);

        json j;
        j["session_id"] = dose.session_id;
        j["subject_id"] = dose.subject_id;
        j["artifact_count"] = dose.artifact_count;
        j["discarded"] = dose.discarded;
        j["totals"] = io::dose_totals_to_json(dose.totals);
        json event_rows = json::array();
        for (const auto& m : metrics)
          event_rows.push_back({{"event_time", m.event_time},
                                {"peak_pressure_psi", m.peak_pressure_psi},
                                {"peak_level_db_spl", m.peak_level_db_spl},
                                {"positive_impulse_psi_ms", m.positive_impulse_psi_ms},
                                {"is_artifact", m.is_artifact},
                                {"artifact_score", m.artifact_score}});
        j["events"] = event_rows;
        json series = json::array();
        for (DoseMetric kind : kAllDoseMetrics)
          for (double thr : cfg.thresholds_db)
            series.push_back(
                io::dose_series_to_json(accumulate_dose(clean, {}, kind, thr)));
        j["series"] = series;

        std::vector<std::string> row = {e.session_id, e.subject_id,
                                        std::to_string(dose.artifact_count),
                                        dose.discarded ? "1" : "0"};
        for (std::size_t m = 0; m < 4; ++m)
          for (std::size_t t = 0; t < 7; ++t)
            row.push_back(io::format_double(dose.totals[m][t]));
        slots[i] = Slot{std::move(j), std::move(row)};
      },
      [&](std::size_t i) {
        const SessionEntry& e = idx.sessions[i];
        const fs::path dir = session_dir(root, e.session_id);
        inputs.push_back(dir / "signals.json");
        inputs.push_back(dir / "events.f32");
        io::write_json(dose_json_path(root, e.session_id), slots[i].out);
        outputs.push_back(dose_json_path(root, e.session_id));
        summary.row(slots[i].summary_row);
        slots[i] = Slot{};
      });
  outputs.push_back(root / "dose" / "summary.csv");

  io::write_manifest(root, "dose", config_hash(cfg, "dose"), inputs, outputs);
  std::printf("dose: %zu sessions -> %s\n", idx.sessions.size(),
              (root / "dose").string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// Stage: features
// ---------------------------------------------------------------------------

int cmd_features(const RunConfig& cfg, const fs::path& root) {
  const CohortIndex idx = read_cohort_index(root);

  std::vector<fs::path> inputs = {cohort_json_path(root)};
  std::vector<fs::path> outputs;
  io::CsvWriter index_csv(root / "features" / "index.csv");
  index_csv.row({"session_id", "subject_id", "dual_eog", "n_gait", "n_balance",
                 "n_blink", "n_saccade"});

  struct Slot {
    std::map<std::string, ObservationStream> streams;
    std::vector<fs::path> read;
  };
  std::vector<Slot> slots(idx.sessions.size());
  for_each_ordered(
      idx.sessions.size(), cfg.jobs,
      [&](std::size_t i) {
        const SessionEntry& e = idx.sessions[i];
        const fs::path dir = session_dir(root, e.session_id);
        const json signals =
            io::read_json(require_artifact(dir / "signals.json", "simulate"));

        // Assemble the recorded signals and run the shared extraction path;
        // the event list stays empty because dose is a separate stage.
        SyntheticSession s;
        s.session_id = e.session_id;
        s.subject_id = e.subject_id;
        s.dual_eog = signals.at("dual_eog").get<bool>();
        s.veog = io::read_signal(dir, signals.at("veog"));
        slots[i].read.push_back(dir / "veog.f32");
        if (s.dual_eog) {
          s.heog = io::read_signal(dir, signals.at("heog"));
          slots[i].read.push_back(dir / "heog.f32");
        }
        s.accel = read_accel_blob(dir, signals.at("accel"));
        slots[i].read.push_back(dir / "accel.f32");
        slots[i].read.push_back(dir / "signals.json");

        const SessionFeatures f = extract_session(s);
        SessionRecord rec = to_session_record(f, cfg.label_threshold_db);
        slots[i].streams = std::move(rec.modalities);
      },
      [&](std::size_t i) {
        const SessionEntry& e = idx.sessions[i];
        for (const auto& p : slots[i].read) inputs.push_back(p);
        io::CsvWriter csv(features_csv_path(root, e.session_id));
        csv.row({"stream", "t", "n", "values"});
        std::array<std::size_t, 4> counts{};
        const char* order[4] = {"gait", "balance", "blink", "saccade"};
        for (std::size_t m = 0; m < 4; ++m) {
          const auto it = slots[i].streams.find(order[m]);
          if (it == slots[i].streams.end()) continue;
          counts[m] = it->second.timestamps.size();
          for (std::size_t r = 0; r < it->second.timestamps.size(); ++r) {
            std::vector<std::string> row = {
                order[m], io::format_double(it->second.timestamps[r]),
                std::to_string(it->second.rows[r].size())};
            for (double v : it->second.rows[r])
              row.push_back(io::format_double(v));
            csv.row(row);
          }
        }
        outputs.push_back(features_csv_path(root, e.session_id));
        index_csv.row({e.session_id, e.subject_id, e.dual_eog ? "1" : "0",
                       std::to_string(counts[0]), std::to_string(counts[1]),
                       std::to_string(counts[2]), std::to_string(counts[3])});
        slots[i] = Slot{};
      });
  outputs.push_back(root / "features" / "index.csv");

  io::write_manifest(root, "features", config_hash(cfg, "features"), inputs,
                     outputs);
  std::printf("features: %zu sessions -> %s\n", idx.sessions.size(),
              (root / "features").string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// Stage: change
// ---------------------------------------------------------------------------

int cmd_change(const RunConfig& cfg, const fs::path& root) {
  const CohortIndex idx = read_cohort_index(root);
  const RiskConfig rc = risk_config(cfg);

  std::vector<fs::path> inputs = {cohort_json_path(root)};
  std::vector<fs::path> outputs;

  struct Slot {
    std::map<std::string, ScoreSeries> scores;
  };
  std::vector<Slot> slots(idx.sessions.size());
  for_each_ordered(
      idx.sessions.size(), cfg.jobs,
      [&](std::size_t i) {
        const auto rec =
            load_record(root, idx.sessions[i], cfg.label_threshold_db, false);
        slots[i].scores = change_scores(*rec, rc);
      },
      [&](std::size_t i) {
        const SessionEntry& e = idx.sessions[i];
        inputs.push_back(features_csv_path(root, e.session_id));
        io::CsvWriter csv(root / "change" / (e.session_id + ".csv"));
        csv.row({"stream", "t", "raw", "running_mean", "z_instant",
                 "z_smoothed"});
        for (const auto& [name, s] : slots[i].scores)
          for (std::size_t r = 0; r < s.timestamps.size(); ++r)
            csv.row({name, io::format_double(s.timestamps[r]),
                     io::format_double(s.raw_feature[r]),
                     io::format_double(s.running_mean[r]),
                     io::format_double(s.z_instant[r]),
                     io::format_double(s.z_smoothed[r])});
        outputs.push_back(root / "change" / (e.session_id + ".csv"));
        slots[i] = Slot{};
      });

  io::write_manifest(root, "change", config_hash(cfg, "change"), inputs,
                     outputs);
  std::printf("change: %zu sessions -> %s\n", idx.sessions.size(),
              (root / "change").string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// Stages: train and score
// ---------------------------------------------------------------------------

const std::array<const char*, 4> kModalities = {"gait", "balance", "blink",
                                                "saccade"};

struct LoadedCohort {
  std::vector<SessionRecord> records;          // non-discarded sessions only
  std::vector<SessionEntry> entries;           // aligned with records
  std::vector<fs::path> inputs;                // files read
};

LoadedCohort load_cohort_records(const fs::path& root, const CohortIndex& idx,
                                 const RunConfig& cfg) {
  LoadedCohort out;
  out.inputs.push_back(cohort_json_path(root));
  for (const auto& e : idx.sessions) {
    out.inputs.push_back(features_csv_path(root, e.session_id));
    out.inputs.push_back(dose_json_path(root, e.session_id));
    auto rec = load_record(root, e, cfg.label_threshold_db, true);
    if (!rec) continue;  // discarded for excess artifacts
    out.records.push_back(std::move(*rec));
    out.entries.push_back(e);
  }
  return out;
}

fs::path global_model_path(const fs::path& root, const std::string& modality) {
  return root / "models" / ("global_" + modality + ".json");
}

fs::path fold_model_path(const fs::path& root, const std::string& subject,
                         const std::string& modality) {
  return root / "models" / ("fold_" + subject + "_" + modality + ".json");
}

int cmd_train(const RunConfig& cfg, const fs::path& root) {
  const CohortIndex idx = read_cohort_index(root);
  const RiskConfig rc = risk_config(cfg);
  LoadedCohort cohort = load_cohort_records(root, idx, cfg);

  std::set<std::string> subject_set;
  for (const auto& r : cohort.records) subject_set.insert(r.subject_id);
  const std::vector<std::string> subjects(subject_set.begin(),
                                          subject_set.end());

  std::vector<fs::path> outputs;
  json audit;
  audit["label_threshold_db"] = cfg.label_threshold_db;
  audit["seed"] = cfg.seed;
  audit["subjects"] = subjects;
  json modality_audit;
  for (const char* modality : kModalities) {
    json m;
    // Deployment model: trained on every eligible session.
    bool global_ok = false;
    try {
      const std::uint64_t seed =
          cfg.seed ^ detail::hash_name(modality) ^ 0x9e3779b97f4a7c15ULL;
      const ModalityModel model =
          train_modality_model(cohort.records, modality, "", seed, rc);
      io::write_json(global_model_path(root, modality),
                     io::modality_model_to_json(model));
      outputs.push_back(global_model_path(root, modality));
      global_ok = true;
    } catch (const std::invalid_argument& e) {
      m["global_error"] = e.what();
    }
    m["global_trained"] = global_ok;

    // Leave-one-subject-out folds; fold seeds depend only on the fold index
    // and the modality so held-out scores are reproducible.
    json folds = json::array();
    if (global_ok) {
      for (std::size_t fold = 0; fold < subjects.size(); ++fold) {
        json f;
        f["test_subject"] = subjects[fold];
        try {
          const std::uint64_t seed = fold ^ detail::hash_name(modality);
          const ModalityModel model = train_modality_model(
              cohort.records, modality, subjects[fold], seed, rc);
          io::write_json(fold_model_path(root, subjects[fold], modality),
                         io::modality_model_to_json(model));
          outputs.push_back(fold_model_path(root, subjects[fold], modality));
          f["trained"] = true;
        } catch (const std::invalid_argument& e) {
          f["trained"] = false;
          f["error"] = e.what();
        }
        folds.push_back(f);
      }
    }
    m["folds"] = folds;
    modality_audit[modality] = m;
  }
  audit["modalities"] = modality_audit;
  io::write_json(root / "models" / "train.json", audit);
  outputs.push_back(root / "models" / "train.json");

  io::write_manifest(root, "train", config_hash(cfg, "train"), cohort.inputs,
                     outputs);
  std::printf("train: %zu sessions, %zu subjects -> %s\n",
              cohort.records.size(), subjects.size(),
              (root / "models").string().c_str());
  return 0;
}

int cmd_score(const RunConfig& cfg, const fs::path& root) {
  const CohortIndex idx = read_cohort_index(root);
  const RiskConfig rc = risk_config(cfg);
  LoadedCohort cohort = load_cohort_records(root, idx, cfg);
  std::vector<fs::path> inputs = cohort.inputs;

  const json audit =
      io::read_json(require_artifact(root / "models" / "train.json", "train"));
  inputs.push_back(root / "models" / "train.json");

  // Folds that could not be trained (degenerate label split on a small
  // cohort) are recorded in the audit; their sessions are skipped rather
  // than treated as missing artifacts.
  std::set<std::pair<std::string, std::string>> untrained_folds;
  for (const char* modality : kModalities)
    for (const auto& f : audit.at("modalities").at(modality).at("folds"))
      if (!f.at("trained").get<bool>())
        untrained_folds.insert({f.at("test_subject").get<std::string>(), modality});

  io::CsvWriter series_csv(root / "scores" / "series.csv");
  series_csv.row({"session_id", "subject_id", "modality", "t", "llr"});
  io::CsvWriter max_csv(root / "scores" / "max.csv");
  max_csv.row({"session_id", "subject_id", "modality", "max_score"});

  // Models are loaded once per (subject, modality) pair.
  std::map<std::string, ModalityModel> model_cache;
  std::size_t scored = 0;
  for (std::size_t i = 0; i < cohort.records.size(); ++i) {
    const SessionRecord& rec = cohort.records[i];
    for (const char* modality : kModalities) {
      if (!audit.at("modalities").at(modality).at("global_trained").get<bool>())
        continue;
      if (!rec.modalities.count(modality)) continue;
      if (!session_included(rec, modality, rc)) continue;
      if (cfg.model_set != "global" &&
          untrained_folds.count({rec.subject_id, modality}))
        continue;
      const fs::path model_path =
          cfg.model_set == "global"
              ? global_model_path(root, modality)
              : fold_model_path(root, rec.subject_id, modality);
      const std::string key = model_path.string();
      auto it = model_cache.find(key);
      if (it == model_cache.end()) {
        require_artifact(model_path, "train");
        inputs.push_back(model_path);
        it = model_cache
                 .emplace(key, io::modality_model_from_json(io::read_json(model_path)))
                 .first;
      }
      const SessionScore s = score_session(rec, modality, it->second, rc);
      for (std::size_t r = 0; r < s.timestamps.size(); ++r)
        series_csv.row({s.session_id, s.subject_id, s.modality,
                        io::format_double(s.timestamps[r]),
                        io::format_double(s.llr[r])});
      max_csv.row({s.session_id, s.subject_id, s.modality,
                   io::format_double(s.max_score)});
      ++scored;
    }
  }
  json meta;
  meta["model_set"] = cfg.model_set;
  meta["label_threshold_db"] = cfg.label_threshold_db;
  io::write_json(root / "scores" / "scoring.json", meta);

  const std::vector<fs::path> outputs = {root / "scores" / "series.csv",
                                         root / "scores" / "max.csv",
                                         root / "scores" / "scoring.json"};
  io::write_manifest(root, "score", config_hash(cfg, "score"), inputs, outputs);
  std::printf("score: %zu session-modality series (%s models) -> %s\n", scored,
              cfg.model_set.c_str(), (root / "scores").string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// Stage: fuse
// ---------------------------------------------------------------------------

std::vector<SessionScore> read_scores(const fs::path& root,
                                      std::vector<fs::path>* inputs) {
  const fs::path series_path =
      require_artifact(root / "scores" / "series.csv", "score");
  const fs::path max_path = require_artifact(root / "scores" / "max.csv", "score");
  if (inputs) {
    inputs->push_back(series_path);
    inputs->push_back(max_path);
  }

  std::map<std::pair<std::string, std::string>, double> max_by_key;
  {
    const auto rows = io::read_csv(max_path);
    for (std::size_t r = 1; r < rows.size(); ++r)
      max_by_key[{rows[r][0], rows[r][2]}] = io::parse_double(rows[r][3]);
  }
  std::vector<SessionScore> scores;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  const auto rows = io::read_csv(series_path);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::pair<std::string, std::string> key = {row[0], row[2]};
    auto it = index.find(key);
    if (it == index.end()) {
      SessionScore s;
      s.session_id = row[0];
      s.subject_id = row[1];
      s.modality = row[2];
      s.max_score = max_by_key.count(key) ? max_by_key[key]
                                          : -std::numeric_limits<double>::infinity();
      it = index.emplace(key, scores.size()).first;
      scores.push_back(std::move(s));
    }
    scores[it->second].timestamps.push_back(io::parse_double(row[3]));
    scores[it->second].llr.push_back(io::parse_double(row[4]));
  }
  return scores;
}

int cmd_fuse(const RunConfig& cfg, const fs::path& root) {
  std::vector<fs::path> inputs;
  const std::vector<SessionScore> scores = read_scores(root, &inputs);

  FusionConfig fc;
  fc.average_maxima = cfg.fusion == "maxima";
  const std::vector<SessionScore> fused = fuse_sessions(scores, fc);

  io::CsvWriter fused_csv(root / "fused" / "fused.csv");
  fused_csv.row({"session_id", "subject_id", "t", "llr"});
  io::CsvWriter summary_csv(root / "fused" / "summary.csv");
  summary_csv.row({"session_id", "subject_id", "max_score"});
  for (const auto& f : fused) {
    for (std::size_t r = 0; r < f.timestamps.size(); ++r)
      fused_csv.row({f.session_id, f.subject_id,
                     io::format_double(f.timestamps[r]),
                     io::format_double(f.llr[r])});
    summary_csv.row({f.session_id, f.subject_id,
                     io::format_double(f.max_score)});
  }

  const std::vector<fs::path> outputs = {root / "fused" / "fused.csv",
                                         root / "fused" / "summary.csv"};
  io::write_manifest(root, "fuse", config_hash(cfg, "fuse"), inputs, outputs);
  std::printf("fuse: %zu fused sessions (%s) -> %s\n", fused.size(),
              cfg.fusion.c_str(), (root / "fused").string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// Stage: correlate
// ---------------------------------------------------------------------------

std::vector<SessionScore> read_fused(const fs::path& root,
                                     std::vector<fs::path>* inputs) {
  const fs::path fused_path =
      require_artifact(root / "fused" / "fused.csv", "fuse");
  const fs::path summary_path =
      require_artifact(root / "fused" / "summary.csv", "fuse");
  if (inputs) {
    inputs->push_back(fused_path);
    inputs->push_back(summary_path);
  }
  std::map<std::string, double> max_by_id;
  std::map<std::string, std::string> subject_by_id;
  std::vector<std::string> order;
  {
    const auto rows = io::read_csv(summary_path);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      order.push_back(rows[r][0]);
      subject_by_id[rows[r][0]] = rows[r][1];
      max_by_id[rows[r][0]] = io::parse_double(rows[r][2]);
    }
  }
  std::map<std::string, SessionScore> by_id;
  const auto rows = io::read_csv(fused_path);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    SessionScore& s = by_id[rows[r][0]];
    if (s.session_id.empty()) {
      s.session_id = rows[r][0];
      s.subject_id = rows[r][1];
      s.modality = "fused";
      s.max_score = max_by_id.count(rows[r][0]) ? max_by_id[rows[r][0]] : 0.0;
    }
    s.timestamps.push_back(io::parse_double(rows[r][2]));
    s.llr.push_back(io::parse_double(rows[r][3]));
  }
  std::vector<SessionScore> fused;
  for (const auto& id : order) {
    auto it = by_id.find(id);
    if (it != by_id.end()) {
      fused.push_back(std::move(it->second));
    } else {
      // Maxima-averaged runs can fuse a session without a time series.
      SessionScore s;
      s.session_id = id;
      s.subject_id = subject_by_id[id];
      s.modality = "fused";
      s.max_score = max_by_id[id];
      fused.push_back(std::move(s));
    }
  }
  return fused;
}

int cmd_correlate(const RunConfig& cfg, const fs::path& root) {
  const CohortIndex idx = read_cohort_index(root);
  const RiskConfig rc = risk_config(cfg);
  std::vector<fs::path> inputs;
  const std::vector<SessionScore> fused = read_fused(root, &inputs);
  const std::vector<SessionScore> modality_scores = read_scores(root, &inputs);

  LoadedCohort cohort = load_cohort_records(root, idx, cfg);
  for (const auto& p : cohort.inputs) inputs.push_back(p);

  std::vector<SessionDose> doses;
  std::map<std::string, std::array<DoseSeries, 4>> dose_series;
  for (const auto& e : idx.sessions) {
    SessionDoseArtifacts art = read_dose_artifacts(root, e.session_id);
    doses.push_back(art.dose);
    std::array<DoseSeries, 4> per_metric;
    bool complete = true;
    for (std::size_t m = 0; m < 4; ++m) {
      const DoseSeries* s =
          find_series(art.series, kAllDoseMetrics[m], cfg.label_threshold_db);
      if (!s) {
        complete = false;
        break;
      }
      per_metric[m] = *s;
    }
    if (complete && !art.dose.discarded)
      dose_series[e.session_id] = std::move(per_metric);
  }

  std::vector<fs::path> outputs;

  // Dose-response sweep: held-out fused maxima against every dose metric and
  // threshold, plus the elapsed-time baseline trained the same way.
  const SweepResult sweep = dose_response_sweep(fused, doses, cohort.records, rc);
  {
    io::CsvWriter csv(root / "analysis" / "sweep.csv");
    csv.row({"metric", "threshold_db", "spearman_rho"});
    for (std::size_t m = 0; m < 4; ++m)
      for (std::size_t t = 0; t < 7; ++t)
        csv.row({dose_metric_name(kAllDoseMetrics[m]),
                 io::format_double(kDoseThresholdsDb[t]),
                 io::format_double(sweep.rho[m][t])});
    outputs.push_back(root / "analysis" / "sweep.csv");
    io::CsvWriter base(root / "analysis" / "baseline.csv");
    base.row({"duration_baseline_rho", "dropped_sessions"});
    base.row({io::format_double(sweep.duration_baseline_rho),
              std::to_string(sweep.dropped_sessions)});
    outputs.push_back(root / "analysis" / "baseline.csv");
  }

  const std::size_t label_idx = *grid_threshold_index(cfg.label_threshold_db);

  // Pairwise similarity of the dose metrics at the label threshold.
  {
    const auto table = metric_similarity(doses, label_idx);
    io::CsvWriter csv(root / "analysis" / "similarity.csv");
    std::vector<std::string> header = {"metric"};
    for (DoseMetric m : kAllDoseMetrics) header.push_back(dose_metric_name(m));
    csv.row(header);
    for (std::size_t i = 0; i < 4; ++i) {
      std::vector<std::string> row = {dose_metric_name(kAllDoseMetrics[i])};
      for (std::size_t j = 0; j < 4; ++j)
        row.push_back(io::format_double(table[i][j]));
      csv.row(row);
    }
    outputs.push_back(root / "analysis" / "similarity.csv");
  }

  // Sensor-subset ablation against the blast count at the label threshold.
  {
    const auto rows = ablation(modality_scores, doses, 0, label_idx);
    io::CsvWriter csv(root / "analysis" / "ablation.csv");
    csv.row({"name", "available", "spearman_rho", "p_value", "n"});
    for (const auto& r : rows)
      csv.row({r.name, r.available ? "1" : "0",
               r.available ? io::format_double(r.corr.rho) : "NA",
               r.available ? io::format_double(r.corr.p_value) : "NA",
               std::to_string(r.corr.n)});
    outputs.push_back(root / "analysis" / "ablation.csv");
  }

  // Directionality of the pooled per-frame change scores against dose.
  {
    io::CsvWriter csv(root / "analysis" / "direction.csv");
    csv.row({"stream", "spearman_rho", "p_value", "n"});
    const std::array<std::pair<const char*, std::size_t>, 3> posts = {
        {{"gait", kGaitDirectionColumn}, {"balance", 0}, {"blink", 0}}};
    for (const auto& [modality, column] : posts) {
      const auto pooled = pooled_feature_dose(cohort.records, modality, column,
                                              rc.window_for(modality));
      std::string name = modality;
      if (std::string(modality) == "gait")
        name += "[" + std::to_string(column) + "]";
      try {
        const CorrelationResult corr = correlate(pooled.second, pooled.first);
        csv.row({name, io::format_double(corr.rho),
                 io::format_double(corr.p_value), std::to_string(corr.n)});
      } catch (const std::invalid_argument&) {
        csv.row({name, "NA", "NA", std::to_string(pooled.first.size())});
      }
    }
    outputs.push_back(root / "analysis" / "direction.csv");
  }

  // Reaction-time drift screen across the cohort's monthly series.
  {
    const fs::path anam_path =
        require_artifact(root / "cohort" / "anam.csv", "simulate");
    inputs.push_back(anam_path);
    const auto rows = io::read_csv(anam_path);
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
        by_subject;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (!by_subject.count(rows[r][0])) order.push_back(rows[r][0]);
      by_subject[rows[r][0]].first.push_back(io::parse_double(rows[r][1]));
      by_subject[rows[r][0]].second.push_back(io::parse_double(rows[r][2]));
    }
    io::CsvWriter csv(root / "analysis" / "trend.csv");
    csv.row({"subject_id", "slope_ms_per_day", "p_value", "flagged"});
    for (const auto& subject : order) {
      const auto& [days, ms] = by_subject[subject];
      const ReactionTimeTrend t = anam_trend(days, ms);
      csv.row({subject, io::format_double(t.slope_ms_per_day),
               io::format_double(t.p_value), t.flagged ? "1" : "0"});
    }
    outputs.push_back(root / "analysis" / "trend.csv");
  }

  // Alert crossings: first time each fused session reaches the alert level
  // and the accumulated dose at that moment.
  {
    const auto rows = case_study_report(fused, dose_series, cfg.alert_level);
    io::CsvWriter csv(root / "analysis" / "case.csv");
    csv.row({"session_id", "crossed", "crossing_time_s",
             "blast_count_at_crossing", "cum_peak_psi_at_crossing",
             "impulse_psi_ms_at_crossing", "lzeq_db_at_crossing"});
    for (const auto& r : rows) {
      std::vector<std::string> row = {r.session_id, r.crossed ? "1" : "0",
                                      io::format_double(r.crossing_time)};
      for (std::size_t m = 0; m < 4; ++m)
        row.push_back(io::format_double(r.dose_at_crossing[m]));
      csv.row(row);
    }
    outputs.push_back(root / "analysis" / "case.csv");
  }

  io::write_manifest(root, "correlate", config_hash(cfg, "correlate"), inputs,
                     outputs);
  std::printf("correlate: %zu fused sessions, %zu dose summaries -> %s\n",
              fused.size(), doses.size(),
              (root / "analysis").string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// Stage: report
// ---------------------------------------------------------------------------

int cmd_report(const RunConfig& cfg, const fs::path& root) {
  std::vector<fs::path> inputs;
  const auto need = [&](const fs::path& p, const char* producer) {
    require_artifact(p, producer);
    inputs.push_back(p);
    return p;
  };
  const fs::path sweep_path = need(root / "analysis" / "sweep.csv", "correlate");
  const fs::path baseline_path =
      need(root / "analysis" / "baseline.csv", "correlate");
  const fs::path direction_path =
      need(root / "analysis" / "direction.csv", "correlate");
  const fs::path trend_path = need(root / "analysis" / "trend.csv", "correlate");
  const fs::path case_path = need(root / "analysis" / "case.csv", "correlate");
  const fs::path fused_path = need(root / "fused" / "fused.csv", "fuse");
  const fs::path summary_path = need(root / "fused" / "summary.csv", "fuse");
  const fs::path anam_path = need(root / "cohort" / "anam.csv", "simulate");

  std::vector<fs::path> outputs;

  // Sweep plot: one line per dose metric across the threshold grid.
  std::string peak_metric;
  double peak_threshold = 0.0;
  double peak_rho = -std::numeric_limits<double>::infinity();
  {
    const auto rows = io::read_csv(sweep_path);
    std::map<std::string, io::PlotSeries> by_metric;
    std::vector<std::string> order;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const std::string& metric = rows[r][0];
      if (!by_metric.count(metric)) {
        order.push_back(metric);
        by_metric[metric].label = metric;
      }
      const double thr = io::parse_double(rows[r][1]);
      const double rho = io::parse_double(rows[r][2]);
      by_metric[metric].x.push_back(thr);
      by_metric[metric].y.push_back(rho);
      if (std::isfinite(rho) && rho > peak_rho) {
        peak_rho = rho;
        peak_metric = metric;
        peak_threshold = thr;
      }
    }
    std::vector<io::PlotSeries> series;
    for (const auto& m : order) series.push_back(by_metric[m]);
    io::write_svg_lines(root / "report" / "sweep.svg",
                        "Dose-response by metric and threshold",
                        "threshold (dB SPL)", "Spearman rho", series);
    outputs.push_back(root / "report" / "sweep.svg");
  }

  // Fused-score plot: the highest-scoring sessions with the alert level.
  std::size_t fused_sessions = 0;
  {
    const auto summary = io::read_csv(summary_path);
    std::vector<std::pair<double, std::string>> ranked;
    for (std::size_t r = 1; r < summary.size(); ++r)
      ranked.push_back({io::parse_double(summary[r][2]), summary[r][0]});
    fused_sessions = ranked.size();
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    std::set<std::string> keep;
    for (std::size_t i = 0; i < ranked.size() && i < 6; ++i)
      keep.insert(ranked[i].second);

    std::map<std::string, io::PlotSeries> by_session;
    double tmin = 0.0, tmax = 1.0;
    bool any = false;
    const auto rows = io::read_csv(fused_path);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (!keep.count(rows[r][0])) continue;
      const double t = io::parse_double(rows[r][2]);
      by_session[rows[r][0]].label = rows[r][0];
      by_session[rows[r][0]].x.push_back(t);
      by_session[rows[r][0]].y.push_back(io::parse_double(rows[r][3]));
      tmin = any ? std::min(tmin, t) : t;
      tmax = any ? std::max(tmax, t) : t;
      any = true;
    }
    std::vector<io::PlotSeries> series;
    for (const auto& [sid, s] : by_session) series.push_back(s);
    io::PlotSeries level;
    level.label = "alert level";
    level.x = {tmin, tmax};
    level.y = {cfg.alert_level, cfg.alert_level};
    series.push_back(level);
    io::write_svg_lines(root / "report" / "fused.svg",
                        "Fused session scores (top sessions)", "time (s)",
                        "fused score", series);
    outputs.push_back(root / "report" / "fused.svg");
  }

  // Reaction-time plot: flagged subjects plus a few stable ones for contrast.
  std::vector<std::string> flagged;
  {
    const auto trows = io::read_csv(trend_path);
    std::vector<std::string> stable;
    for (std::size_t r = 1; r < trows.size(); ++r)
      (trows[r][3] == "1" ? flagged : stable).push_back(trows[r][0]);
    std::set<std::string> keep(flagged.begin(), flagged.end());
    for (std::size_t i = 0; i < stable.size() && i < 3; ++i)
      keep.insert(stable[i]);
    std::map<std::string, io::PlotSeries> by_subject;
    const auto rows = io::read_csv(anam_path);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (!keep.count(rows[r][0])) continue;
      by_subject[rows[r][0]].label = rows[r][0];
      by_subject[rows[r][0]].x.push_back(io::parse_double(rows[r][1]));
      by_subject[rows[r][0]].y.push_back(io::parse_double(rows[r][2]));
    }
    std::vector<io::PlotSeries> series;
    for (const auto& [sid, s] : by_subject) series.push_back(s);
    io::write_svg_lines(root / "report" / "trend.svg",
                        "Monthly reaction time by subject", "day",
                        "reaction time (ms)", series);
    outputs.push_back(root / "report" / "trend.svg");
  }

  // Headline numbers collected from the analysis artifacts.
  {
    const auto baseline = io::read_csv(baseline_path);
    const auto case_rows = io::read_csv(case_path);
    std::size_t crossings = 0;
    for (std::size_t r = 1; r < case_rows.size(); ++r)
      if (case_rows[r][1] == "1") ++crossings;
    io::CsvWriter csv(root / "report" / "summary.csv");
    csv.row({"key", "value"});
    csv.row({"fused_sessions", std::to_string(fused_sessions)});
    csv.row({"peak_sweep_metric", peak_metric});
    csv.row({"peak_sweep_threshold_db", io::format_double(peak_threshold)});
    csv.row({"peak_sweep_rho", io::format_double(peak_rho)});
    csv.row({"duration_baseline_rho", baseline.size() > 1 ? baseline[1][0] : "NA"});
    csv.row({"dropped_sessions", baseline.size() > 1 ? baseline[1][1] : "NA"});
    csv.row({"alert_level", io::format_double(cfg.alert_level)});
    csv.row({"alert_crossings", std::to_string(crossings)});
    csv.row({"flagged_subjects", std::to_string(flagged.size())});
    std::string ids;
    for (std::size_t i = 0; i < flagged.size(); ++i) {
      if (i) ids += ";";
      ids += flagged[i];
    }
    csv.row({"flagged_subject_ids", ids});
    outputs.push_back(root / "report" / "summary.csv");
  }

  io::write_manifest(root, "report", config_hash(cfg, "report"), inputs,
                     outputs);
  std::printf("report: -> %s\n", (root / "report").string().c_str());
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  RunConfig cfg;

  // The config file is applied before flag parsing so flags override it.
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc)
      apply_config_file(&cfg, argv[i + 1]);
    else if (arg.rfind("--config=", 0) == 0)
      apply_config_file(&cfg, arg.substr(std::strlen("--config=")));
  }

  CLI::App app{
      "Wearable blast dose-response pipeline: synthetic cohorts, blast "
      "dosimetry, eye and gait features, online change scores, risk models, "
      "and dose-response analyses."};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file; flags override its values");
  app.add_option("--out", cfg.out, "output root directory")
      ->envname("BLASTDOSE_OUT");
  app.add_option("--seed", cfg.seed, "master seed for generation and training");
  app.add_option("--jobs", cfg.jobs,
                 "worker threads per stage (results committed in input order)");
  app.add_option("--threshold-db", cfg.thresholds_db,
                 "dose threshold grid in dB SPL, strictly ascending")
      ->expected(-1);
  app.add_option("--fusion", cfg.fusion, "fusion rule: series or maxima");
  app.add_option("--label-threshold", cfg.label_threshold_db,
                 "threshold whose blast count labels model training");
  app.add_option("--alert-level", cfg.alert_level,
                 "fused-score level treated as an alert crossing");

  CLI::App* simulate =
      app.add_subcommand("simulate", "generate a synthetic wearable cohort");
  simulate->add_option("--subjects", cfg.subjects, "number of subjects");
  simulate->add_option("--base-sessions", cfg.base_sessions,
                       "sessions per subject");
  simulate->add_option("--extra-session-subjects", cfg.extra_session_subjects,
                       "leading subjects that get one extra session");
  simulate->add_option("--duration", cfg.session_duration_s,
                       "session length in seconds");
  simulate->add_option("--dual-fraction", cfg.dual_eog_fraction,
                       "fraction of sessions with both EOG channels");
  simulate->add_flag("--couple,!--no-couple", cfg.couple,
                     "couple physiology to blast exposure");
  simulate->add_option("--case-subject", cfg.case_subject,
                       "subject index given the susceptible case profile");
  std::vector<int> drifter_flag;
  simulate->add_option("--anam-drifter", drifter_flag,
                       "subject index with a drifting reaction-time series");

  CLI::App* dose = app.add_subcommand(
      "dose", "compute per-event metrics and cumulative dose series");
  CLI::App* features = app.add_subcommand(
      "features", "extract blink, saccade, gait, and balance features");
  CLI::App* change =
      app.add_subcommand("change", "compute online change scores per stream");
  CLI::App* train = app.add_subcommand(
      "train", "fit staircase mixture models (global + leave-one-subject-out)");
  CLI::App* score = app.add_subcommand("score", "score sessions against models");
  score->add_option("--model-set", cfg.model_set,
                    "models to apply: folds (held-out) or global");
  CLI::App* fuse =
      app.add_subcommand("fuse", "fuse per-modality scores per session");
  CLI::App* correlate = app.add_subcommand(
      "correlate", "dose-response sweep, ablation, directionality, trends");
  CLI::App* report =
      app.add_subcommand("report", "render plots and headline tables");

  for (CLI::App* sub : {simulate, dose, features, change, train, score, fuse,
                        correlate, report})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  if (!drifter_flag.empty()) {
    cfg.anam_drifters = drifter_flag;
    cfg.anam_drifters_set = true;
  }
  if (cfg.out.empty())
    die(2, "no output root: pass --out or set BLASTDOSE_OUT");
  validate_config(cfg);
  const fs::path root = fs::path(cfg.out);

  try {
    if (simulate->parsed()) return cmd_simulate(cfg, root);
    if (dose->parsed()) return cmd_dose(cfg, root);
    if (features->parsed()) return cmd_features(cfg, root);
    if (change->parsed()) return cmd_change(cfg, root);
    if (train->parsed()) return cmd_train(cfg, root);
    if (score->parsed()) return cmd_score(cfg, root);
    if (fuse->parsed()) return cmd_fuse(cfg, root);
    if (correlate->parsed()) return cmd_correlate(cfg, root);
    if (report->parsed()) return cmd_report(cfg, root);
  } catch (const std::exception& e) {
    die(1, e.what());
  }
  return 2;
}
