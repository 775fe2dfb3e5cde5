#pragma once
// On-disk artifact plumbing for the pipeline stages: float32 signal blobs
// with JSON sidecars, CSV emission with round-trip-exact doubles, model and
// dose serialization, content digests, run manifests, and minimal SVG line
// plots. Everything written here is byte-deterministic for a fixed input.

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "blastdose/dosimetry.hpp"
#include "blastdose/gmm.hpp"
#include "blastdose/pca.hpp"
#include "blastdose/riskmodel.hpp"
#include "blastdose/rng.hpp"
#include "blastdose/signal.hpp"

namespace blastdose::io {

using nlohmann::json;
namespace fs = std::filesystem;

// Shortest round-trip representation; non-finite values become "NA" (the
// accumulated level metric is undefined until the first event).
inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "NA";
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "NA") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc())
    throw std::invalid_argument("parse_double: bad value '" + s + "'");
  return v;
}

inline std::string hex64(std::uint64_t v) {
  std::array<char, 17> buf;
  std::snprintf(buf.data(), buf.size(), "%016llx",
                static_cast<unsigned long long>(v));
  return std::string(buf.data(), 16);
}

inline void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// --- float32 signal blobs ----------------------------------------------------

inline void write_f32(const fs::path& path, const std::vector<double>& samples) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_f32: cannot open " + path.string());
  std::vector<float> f(samples.begin(), samples.end());
  out.write(reinterpret_cast<const char*>(f.data()),
            std::streamsize(f.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write_f32: write failed " + path.string());
}

inline std::vector<double> read_f32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("read_f32: cannot open " + path.string());
  const std::streamsize bytes = in.tellg();
  if (bytes % std::streamsize(sizeof(float)) != 0)
    throw std::runtime_error("read_f32: truncated file " + path.string());
  in.seekg(0);
  std::vector<float> f(std::size_t(bytes) / sizeof(float));
  in.read(reinterpret_cast<char*>(f.data()), bytes);
  if (!in) throw std::runtime_error("read_f32: read failed " + path.string());
  return std::vector<double>(f.begin(), f.end());
}

// --- digests -------------------------------------------------------------------

inline std::uint64_t digest_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("digest_file: cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the whole stream
  std::array<char, 65536> buf;
  while (in) {
    in.read(buf.data(), std::streamsize(buf.size()));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= std::uint64_t(static_cast<unsigned char>(buf[std::size_t(i)]));
      h *= 1099511628211ULL;
    }
  }
  return h;
}

// --- CSV --------------------------------------------------------------------

class CsvWriter {
 public:
  explicit CsvWriter(const fs::path& path) {
    ensure_parent(path);
    out_.open(path, std::ios::binary);  // '\n' endings on every platform
    if (!out_)
      throw std::runtime_error("CsvWriter: cannot open " + path.string());
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }
  void close() { out_.close(); }

 private:
  std::ofstream out_;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

inline std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

// --- sampled-signal storage ---------------------------------------------------

inline json write_signal(const fs::path& dir, const std::string& name,
                         const SampledSignal& s) {
  write_f32(dir / (name + ".f32"), s.samples);
  json meta;
  meta["file"] = name + ".f32";
  meta["sample_rate_hz"] = s.sample_rate_hz;
  meta["start_time"] = s.start_time;
  meta["n"] = s.samples.size();
  return meta;
}

inline SampledSignal read_signal(const fs::path& dir, const json& meta) {
  SampledSignal s;
  s.samples = read_f32(dir / meta.at("file").get<std::string>());
  s.sample_rate_hz = meta.at("sample_rate_hz").get<double>();
  s.start_time = meta.at("start_time").get<double>();
  if (s.samples.size() != meta.at("n").get<std::size_t>())
    throw std::runtime_error("read_signal: size mismatch for " +
                             meta.at("file").get<std::string>());
  return s;
}

inline void write_json(const fs::path& path, const json& j) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("write_json: cannot open " + path.string());
  out << j.dump(2) << '\n';
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("read_json: cannot open " + path.string());
  json j;
  in >> j;
  return j;
}

// --- model serialization --------------------------------------------------------

inline json gmm_to_json(const Gmm& g) {
  json j;
  j["k"] = g.k;
  j["weights"] = g.weights;
  j["means"] = g.means;
  j["variances"] = g.variances;
  j["regularization"] = g.regularization;
  return j;
}

inline Gmm gmm_from_json(const json& j) {
  Gmm g;
  g.k = j.at("k").get<int>();
  g.weights = j.at("weights").get<std::vector<double>>();
  g.means = j.at("means").get<std::vector<std::vector<double>>>();
  g.variances = j.at("variances").get<std::vector<std::vector<double>>>();
  g.regularization = j.at("regularization").get<double>();
  return g;
}

inline json modality_model_to_json(const ModalityModel& m) {
  json j;
  j["modality"] = m.staircase.modality;
  json parts = json::array();
  for (const auto& p : m.staircase.partitions) {
    json pj;
    pj["percentile"] = p.percentile;
    pj["threshold"] = p.threshold;
    pj["higher"] = gmm_to_json(p.higher);
    pj["lower"] = gmm_to_json(p.lower);
    parts.push_back(pj);
  }
  j["partitions"] = parts;
  j["background_weight"] = m.staircase.background_weight;
  if (m.staircase.background_weight > 0.0)
    j["background"] = gmm_to_json(m.staircase.background);
  j["has_projector"] = m.has_projector;
  if (m.has_projector) {
    json pj;
    pj["dim"] = m.projector.dim;
    pj["n_components"] = m.projector.n_components;
    pj["mean"] = m.projector.mean;
    pj["components"] = m.projector.components;
    pj["eigenvalues"] = m.projector.eigenvalues;
    pj["explained_variance_fraction"] = m.projector.explained_variance_fraction;
    j["projector"] = pj;
  }
  return j;
}

inline ModalityModel modality_model_from_json(const json& j) {
  ModalityModel m;
  m.staircase.modality = j.at("modality").get<std::string>();
  for (const auto& pj : j.at("partitions")) {
    StaircasePartition p;
    p.percentile = pj.at("percentile").get<double>();
    p.threshold = pj.at("threshold").get<double>();
    p.higher = gmm_from_json(pj.at("higher"));
    p.lower = gmm_from_json(pj.at("lower"));
    m.staircase.partitions.push_back(std::move(p));
  }
  m.staircase.background_weight = j.value("background_weight", 0.0);
  if (m.staircase.background_weight > 0.0)
    m.staircase.background = gmm_from_json(j.at("background"));
  m.has_projector = j.at("has_projector").get<bool>();
  if (m.has_projector) {
    const json& pj = j.at("projector");
    m.projector.dim = pj.at("dim").get<std::size_t>();
    m.projector.n_components = pj.at("n_components").get<std::size_t>();
    m.projector.mean = pj.at("mean").get<std::vector<double>>();
    m.projector.components = pj.at("components").get<std::vector<double>>();
    m.projector.eigenvalues = pj.at("eigenvalues").get<std::vector<double>>();
    m.projector.explained_variance_fraction =
        pj.at("explained_variance_fraction").get<std::vector<double>>();
  }
  return m;
}

// --- dose serialization -----------------------------------------------------

// Totals grid with "NA" in place of the undefined (-inf) accumulated level.
inline json dose_totals_to_json(const std::array<std::array<double, 7>, 4>& t) {
  json rows = json::array();
  for (const auto& row : t) {
    json r = json::array();
    for (double v : row) {
      if (std::isfinite(v))
        r.push_back(v);
      else
        r.push_back("NA");
    }
    rows.push_back(r);
  }
  return rows;
}

inline std::array<std::array<double, 7>, 4> dose_totals_from_json(
    const json& j) {
  std::array<std::array<double, 7>, 4> t{};
  for (std::size_t m = 0; m < 4; ++m)
    for (std::size_t i = 0; i < 7; ++i) {
      const json& cell = j.at(m).at(i);
      t[m][i] = cell.is_string() ? -std::numeric_limits<double>::infinity()
                                 : cell.get<double>();
    }
  return t;
}

inline json dose_series_to_json(const DoseSeries& s) {
  json j;
  j["metric"] = dose_metric_name(s.kind);
  j["threshold_db_spl"] = s.threshold_db_spl;
  j["timestamps"] = s.timestamps;
  // JSON has no -inf, so undefined cumulative levels are stored as "NA".
  json values = json::array();
  for (double v : s.cumulative_values)
    if (std::isfinite(v))
      values.push_back(v);
    else
      values.push_back("NA");
  j["values"] = values;
  return j;
}

inline DoseSeries dose_series_from_json(const json& j) {
  DoseSeries s;
  const std::string name = j.at("metric").get<std::string>();
  bool found = false;
  for (DoseMetric m : kAllDoseMetrics)
    if (dose_metric_name(m) == name) {
      s.kind = m;
      found = true;
    }
  if (!found) throw std::runtime_error("dose_series_from_json: bad metric " + name);
  s.threshold_db_spl = j.at("threshold_db_spl").get<double>();
  s.timestamps = j.at("timestamps").get<std::vector<double>>();
  for (const auto& v : j.at("values"))
    s.cumulative_values.push_back(
        v.is_string() ? -std::numeric_limits<double>::infinity()
                      : v.get<double>());
  return s;
}

// --- run manifest --------------------------------------------------------------

// One manifest per stage run: configuration hash, format versions, and
// content digests of every input and output. No timestamps, so a rerun with
// identical inputs produces an identical manifest.
inline void write_manifest(const fs::path& root, const std::string& stage,
                           const std::string& config_hash,
                           const std::vector<fs::path>& inputs,
                           const std::vector<fs::path>& outputs) {
  json j;
  j["stage"] = stage;
  j["config_hash"] = config_hash;
  j["tool_version"] = "1.0.0";
  j["format_version"] = 1;
  const auto entry_list = [&](const std::vector<fs::path>& paths) {
    json arr = json::array();
    for (const fs::path& p : paths) {
      json e;
      e["path"] = fs::relative(p, root).generic_string();
      e["digest"] = hex64(digest_file(p));
      arr.push_back(e);
    }
    return arr;
  };
  j["inputs"] = entry_list(inputs);
  j["outputs"] = entry_list(outputs);
  write_json(root / "manifests" / (stage + ".json"), j);
}

// --- SVG line plots -----------------------------------------------------------

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline std::string fmt2(double v) {
  std::array<char, 32> buf;
  std::snprintf(buf.data(), buf.size(), "%.2f", v);
  return std::string(buf.data());
}

inline std::string fmt_tick(double v) {
  std::array<char, 32> buf;
  std::snprintf(buf.data(), buf.size(), "%.4g", v);
  return std::string(buf.data());
}

}  // namespace detail

// Minimal self-contained line plot; finite points only, one polyline per
// series, fixed palette, axis ticks at the extremes and midpoint.
inline void write_svg_lines(const fs::path& path, const std::string& title,
                            const std::string& x_label,
                            const std::string& y_label,
                            const std::vector<PlotSeries>& series) {
  const double W = 720, H = 420, L = 80, R = 690, T = 40, B = 370;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!std::isfinite(xmin)) {  // nothing plottable
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  const auto sx = [&](double x) {
    return L + (x - xmin) / (xmax - xmin) * (R - L);
  };
  const auto sy = [&](double y) {
    return B - (y - ymin) / (ymax - ymin) * (B - T);
  };
  static const std::array<const char*, 6> palette = {
      "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("write_svg_lines: cannot open " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
      << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2
      << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" "
         "text-anchor=\"middle\">"
      << title << "</text>\n";
  // Axes.
  out << "<line x1=\"" << L << "\" y1=\"" << B << "\" x2=\"" << R
      << "\" y2=\"" << B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L
      << "\" y2=\"" << B << "\" stroke=\"black\"/>\n";
  for (double f : {0.0, 0.5, 1.0}) {
    const double xv = xmin + f * (xmax - xmin);
    const double yv = ymin + f * (ymax - ymin);
    out << "<text x=\"" << detail::fmt2(sx(xv)) << "\" y=\"" << B + 18
        << "\" font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"middle\">"
        << detail::fmt_tick(xv) << "</text>\n";
    out << "<text x=\"" << L - 8 << "\" y=\"" << detail::fmt2(sy(yv) + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"end\">"
        << detail::fmt_tick(yv) << "</text>\n";
  }
  out << "<text x=\"" << (L + R) / 2 << "\" y=\"" << H - 10
      << "\" font-family=\"sans-serif\" font-size=\"12\" "
         "text-anchor=\"middle\">"
      << x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << (T + B) / 2
      << "\" font-family=\"sans-serif\" font-size=\"12\" "
         "text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (T + B) / 2 << ")\">" << y_label << "</text>\n";
  // Series.
  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = palette[si % palette.size()];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[si].x.size(); ++i) {
      if (!std::isfinite(series[si].x[i]) || !std::isfinite(series[si].y[i]))
        continue;
      out << detail::fmt2(sx(series[si].x[i])) << ','
          << detail::fmt2(sy(series[si].y[i])) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << R - 150 << "\" y=\"" << T + 16 + 16 * double(si)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color
        << "\">" << series[si].label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace blastdose::io
