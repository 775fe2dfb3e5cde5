// Artifact plumbing: round-trip fidelity of blobs/CSV/JSON serialization,
// manifest determinism, SVG emission, and the session-to-record pipeline.
#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "blastdose/io.hpp"
#include "blastdose/pipeline.hpp"
#include "blastdose/synth.hpp"

namespace {

using namespace blastdose;
namespace fs = std::filesystem;

fs::path temp_dir() {
  static int counter = 0;
  const fs::path p =
      fs::temp_directory_path() / ("blastdose_io_" + std::to_string(counter++));
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

TEST(Io, DoubleFormattingRoundTripsAndMapsNonFinite) {
  for (double v : {0.1, -3.25, 1e-17, 12345.678901234567, 0.0}) {
    EXPECT_EQ(io::parse_double(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::infinity()), "NA");
  EXPECT_EQ(io::format_double(-std::numeric_limits<double>::infinity()), "NA");
  EXPECT_EQ(io::format_double(std::nan("")), "NA");
  EXPECT_TRUE(std::isinf(io::parse_double("NA")));
  EXPECT_THROW(io::parse_double("x1"), std::invalid_argument);
}

TEST(Io, FloatBlobRoundTripKeepsSinglePrecisionValues) {
  const fs::path dir = temp_dir();
  std::vector<double> samples;
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) samples.push_back(rng.normal() * 100.0);
  io::write_f32(dir / "sig.f32", samples);
  const std::vector<double> back = io::read_f32(dir / "sig.f32");
  ASSERT_EQ(back.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    EXPECT_EQ(back[i], double(float(samples[i])));
  EXPECT_THROW(io::read_f32(dir / "missing.f32"), std::runtime_error);
}

TEST(Io, CsvWriteReadRoundTrip) {
  const fs::path dir = temp_dir();
  {
    io::CsvWriter w(dir / "t.csv");
    w.row({"a", "b", "c"});
    w.row({io::format_double(1.5), "NA", ""});
  }
  const auto rows = io::read_csv(dir / "t.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(rows[1][0], "1.5");
  EXPECT_EQ(rows[1][1], "NA");
  EXPECT_EQ(rows[1][2], "");
}

TEST(Io, SignalSidecarRoundTrip) {
  const fs::path dir = temp_dir();
  SampledSignal s;
  s.sample_rate_hz = 500.0;
  s.start_time = 12.5;
  Rng rng(5);
  for (int i = 0; i < 256; ++i) s.samples.push_back(rng.normal());
  const io::json meta = io::write_signal(dir, "veog", s);
  const SampledSignal back = io::read_signal(dir, meta);
  EXPECT_EQ(back.sample_rate_hz, 500.0);
  EXPECT_EQ(back.start_time, 12.5);
  ASSERT_EQ(back.samples.size(), s.samples.size());
  EXPECT_EQ(back.samples[7], double(float(s.samples[7])));
}

TEST(Io, ModelJsonRoundTripReproducesScoresBitwise) {
  // Scalar staircase.
  std::vector<std::vector<double>> feats;
  std::vector<double> labels;
  Rng rng(11);
  for (int i = 0; i < 400; ++i) {
    const double label = double(i % 10);
    feats.push_back({0.2 * label + rng.normal()});
    labels.push_back(label);
  }
  RiskConfig cfg;
  cfg.gmm_components = 2;
  ModalityModel m;
  m.staircase = train_staircase(feats, labels, 99, cfg, "blink");
  // Attach a projector to exercise that path too.
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> r(6);
    for (auto& v : r) v = rng.normal();
    rows.push_back(r);
  }
  m.projector = pca_fit(rows, 3);
  m.has_projector = true;

  const io::json j = io::modality_model_to_json(m);
  const ModalityModel back = io::modality_model_from_json(j);
  ASSERT_EQ(back.staircase.partitions.size(), m.staircase.partitions.size());
  for (double probe : {-1.0, 0.3, 1.7}) {
    EXPECT_EQ(risk_score(back.staircase, {probe}),
              risk_score(m.staircase, {probe}));
  }
  EXPECT_EQ(back.projector.components, m.projector.components);
  EXPECT_EQ(back.projector.mean, m.projector.mean);
  // Serialization itself is deterministic.
  EXPECT_EQ(j.dump(2), io::modality_model_to_json(m).dump(2));
}

TEST(Io, DoseTotalsAndSeriesRoundTripWithUndefinedLevels) {
  std::array<std::array<double, 7>, 4> totals{};
  totals[0][0] = 3.0;
  totals[1][2] = 0.25;
  for (std::size_t i = 0; i < 7; ++i)
    totals[3][i] = i < 4 ? 97.5 + double(i)
                         : -std::numeric_limits<double>::infinity();
  const auto back = io::dose_totals_from_json(io::dose_totals_to_json(totals));
  for (std::size_t m = 0; m < 4; ++m)
    for (std::size_t i = 0; i < 7; ++i) {
      if (std::isfinite(totals[m][i]))
        EXPECT_EQ(back[m][i], totals[m][i]);
      else
        EXPECT_TRUE(std::isinf(back[m][i]) && back[m][i] < 0);
    }

  DoseSeries s;
  s.kind = DoseMetric::TotalPositiveImpulse;
  s.threshold_db_spl = 155.0;
  s.timestamps = {10.0, 20.0, 30.0};
  s.cumulative_values = {0.5, 1.25, 9.0};
  const DoseSeries sb = io::dose_series_from_json(io::dose_series_to_json(s));
  EXPECT_EQ(sb.kind, s.kind);
  EXPECT_EQ(sb.threshold_db_spl, 155.0);
  EXPECT_EQ(sb.timestamps, s.timestamps);
  EXPECT_EQ(sb.cumulative_values, s.cumulative_values);

  // An equivalent-level series starts undefined until the first qualifying
  // event; the round trip must survive the leading -inf and stay valid JSON.
  DoseSeries lz;
  lz.kind = DoseMetric::LZeq8hr;
  lz.threshold_db_spl = 170.0;
  lz.timestamps = {5.0, 15.0};
  lz.cumulative_values = {-std::numeric_limits<double>::infinity(), 101.25};
  const nlohmann::json encoded = io::dose_series_to_json(lz);
  EXPECT_NO_THROW(nlohmann::json::parse(encoded.dump()));
  const DoseSeries lzb = io::dose_series_from_json(encoded);
  EXPECT_TRUE(std::isinf(lzb.cumulative_values[0]) &&
              lzb.cumulative_values[0] < 0);
  EXPECT_EQ(lzb.cumulative_values[1], 101.25);
}

TEST(Io, ManifestDeterministicWithRelativePathsAndDigests) {
  const fs::path root = temp_dir();
  io::write_f32(root / "a" / "x.f32", {1.0, 2.0, 3.0});
  {
    io::CsvWriter w(root / "b" / "y.csv");
    w.row({"h"});
    w.row({"1"});
  }
  io::write_manifest(root, "stage1", "cafebabe", {root / "a" / "x.f32"},
                     {root / "b" / "y.csv"});
  const std::string first = slurp(root / "manifests" / "stage1.json");
  io::write_manifest(root, "stage1", "cafebabe", {root / "a" / "x.f32"},
                     {root / "b" / "y.csv"});
  EXPECT_EQ(slurp(root / "manifests" / "stage1.json"), first);

  const io::json j = io::read_json(root / "manifests" / "stage1.json");
  EXPECT_EQ(j.at("stage"), "stage1");
  EXPECT_EQ(j.at("inputs").at(0).at("path"), "a/x.f32");
  EXPECT_EQ(j.at("inputs").at(0).at("digest"),
            io::hex64(io::digest_file(root / "a" / "x.f32")));
  EXPECT_FALSE(j.contains("timestamp"));
}

TEST(Io, SvgLinePlotIsWellFormedAndDeterministic) {
  const fs::path dir = temp_dir();
  io::PlotSeries s1{"alpha", {0, 1, 2, 3}, {1.0, 4.0, 2.0, 8.0}};
  io::PlotSeries s2{"beta", {0, 1, 2, 3}, {2.0, 1.0, 5.0, 3.0}};
  io::write_svg_lines(dir / "p.svg", "demo", "x", "y", {s1, s2});
  const std::string svg = slurp(dir / "p.svg");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("polyline"), std::string::npos);
  EXPECT_NE(svg.find("alpha"), std::string::npos);
  EXPECT_NE(svg.find("beta"), std::string::npos);
  io::write_svg_lines(dir / "p2.svg", "demo", "x", "y", {s1, s2});
  EXPECT_EQ(slurp(dir / "p2.svg"), svg);
}

TEST(Io, PipelineExtractsAllModalitiesAndLabels) {
  CohortConfig ccfg;
  ccfg.master_seed = 31;
  ccfg.n_subjects = 3;
  ccfg.base_sessions = 1;
  ccfg.extra_session_subjects = 0;
  auto planned = plan_cohort(ccfg);
  planned[0].plan.dual_eog = true;
  const SyntheticSession s =
      gen_session(planned[0].profile, planned[0].plan);
  const SessionFeatures f = extract_session(s);
  EXPECT_EQ(f.session_id, s.session_id);
  EXPECT_FALSE(f.dose.discarded);
  EXPECT_EQ(f.dose.artifact_count, 2);
  EXPECT_GT(f.blinks.size(), 700u);
  EXPECT_EQ(f.saccades.size(), s.truth.saccades.size());
  EXPECT_GE(f.motion.gait.size(), 25u);

  const SessionRecord r = to_session_record(f);
  ASSERT_TRUE(r.modalities.count("gait"));
  ASSERT_TRUE(r.modalities.count("balance"));
  ASSERT_TRUE(r.modalities.count("blink"));
  ASSERT_TRUE(r.modalities.count("saccade"));
  EXPECT_EQ(r.modalities.at("gait").rows.front().size(), 105u);
  EXPECT_EQ(r.modalities.at("blink").rows.front().size(), 1u);
  // Labels: one point per clean event; the count steps by one exactly at
  // events above 160 dB and ends at the truth count.
  ASSERT_FALSE(r.dose_values.empty());
  EXPECT_EQ(r.dose_values.size(), clean_events(f.events).size());
  EXPECT_LE(r.dose_values.front(), 1.0);
  for (std::size_t i = 1; i < r.dose_values.size(); ++i) {
    const double step = r.dose_values[i] - r.dose_values[i - 1];
    EXPECT_TRUE(step == 0.0 || step == 1.0);
    EXPECT_GE(r.dose_times[i], r.dose_times[i - 1]);
  }
  EXPECT_EQ(r.dose_values.back(), double(s.truth.label_values.size()));

  // Inclusion gates pass for every modality on this session.
  RiskConfig cfg;
  for (const std::string m : {"gait", "balance", "blink"})
    EXPECT_TRUE(session_included(r, m, cfg)) << m;

  // Change scores exist for every scalar column, vector columns keyed by index.
  const auto scores = change_scores(r);
  EXPECT_TRUE(scores.count("blink"));
  EXPECT_TRUE(scores.count("balance"));
  EXPECT_TRUE(scores.count("gait[9]"));
  EXPECT_EQ(scores.at("blink").timestamps.size(), f.blinks.size());
  EXPECT_EQ(scores.at("blink").z_smoothed.size(), f.blinks.size());
}

}  // namespace
