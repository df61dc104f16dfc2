#pragma once

// On-disk formats.
//
//   annotation   JSON {"format":"propseg.annotation.v1","frame","width","height",
//                "instances":[[start,length,...],...]}  or a 16-bit PGM label
//                image (0 = background, k = instance k)
//   proposals    JSON lines {"frame","score","width","height","runs":[start,length,...]}
//   index        JSON {"format":"propseg.index.v1","provenance","frames":[
//                {"id","stage","annotation","proposals"}]}, paths relative to the index
//   manifest     JSON {"format":"propseg.manifest.v1","frames":[{"id","source":[...]}]}
//   report       JSON {"format":"propseg.report.v1",...} or a tab-separated table

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "propseg/error.hpp"
#include "propseg/mask.hpp"
#include "propseg/metrics.hpp"
#include "propseg/postproc.hpp"

namespace propseg {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline constexpr const char* kAnnotationFormat = "propseg.annotation.v1";
inline constexpr const char* kIndexFormat = "propseg.index.v1";
inline constexpr const char* kManifestFormat = "propseg.manifest.v1";
inline constexpr const char* kReportFormat = "propseg.report.v1";

// ---------------------------------------------------------------------------
// File helpers

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(what + ": " + e.what());
  }
}

template <typename T>
T json_get(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(what + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw FormatError(what + ": field '" + key + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// RLE

inline Json runs_to_json(const BinaryMask& m) {
  Json flat = Json::array();
  for (const Run& r : m.runs()) {
    flat.push_back(r.start);
    flat.push_back(r.length);
  }
  return flat;
}

inline BinaryMask mask_from_json(const Json& flat, FrameGeometry geometry, const std::string& what) {
  if (!flat.is_array() || flat.size() % 2 != 0) throw FormatError(what + ": runs must be a flat list of start/length pairs");
  std::vector<Run> runs;
  runs.reserve(flat.size() / 2);
  for (std::size_t i = 0; i < flat.size(); i += 2) {
    if (!flat[i].is_number_integer() || !flat[i + 1].is_number_integer())
      throw FormatError(what + ": runs must be integers");
    runs.push_back({flat[i].get<std::int64_t>(), flat[i + 1].get<std::int64_t>()});
  }
  try {
    return BinaryMask::from_runs(geometry, std::move(runs));
  } catch (const ValidationError& e) {
    throw FormatError(what + ": " + e.what());
  }
}

inline FrameGeometry geometry_from_json(const Json& j, const std::string& what) {
  FrameGeometry g{json_get<std::int64_t>(j, "width", what), json_get<std::int64_t>(j, "height", what)};
  validate(g);
  return g;
}

// ---------------------------------------------------------------------------
// Annotations

inline std::string annotation_to_json(const FrameAnnotation& a) {
  Json j;
  j["format"] = kAnnotationFormat;
  j["frame"] = a.id;
  j["width"] = a.geometry.width;
  j["height"] = a.geometry.height;
  j["instances"] = Json::array();
  for (const BinaryMask& m : a.instances) j["instances"].push_back(runs_to_json(m));
  return j.dump() + "\n";
}

inline void write_annotation(const fs::path& path, const FrameAnnotation& a) { write_file(path, annotation_to_json(a)); }

// 16-bit binary PGM. Values above 255 are stored big-endian as the format requires.
inline std::string label_image_to_pgm(FrameGeometry geometry, const std::vector<std::uint16_t>& labels) {
  validate(geometry);
  if (static_cast<std::int64_t>(labels.size()) != geometry.pixel_count())
    throw GeometryError("label image size does not match geometry");
  std::string out = "P5\n" + std::to_string(geometry.width) + " " + std::to_string(geometry.height) + "\n65535\n";
  out.reserve(out.size() + 2 * labels.size());
  for (std::uint16_t v : labels) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xFF));
  }
  return out;
}

inline std::vector<std::uint16_t> labels_from_instances(const FrameAnnotation& a) {
  std::vector<std::uint16_t> labels(static_cast<std::size_t>(a.geometry.pixel_count()), 0);
  if (a.instances.size() > 65535) throw ValidationError("too many instances for a 16-bit label image");
  for (std::size_t k = 0; k < a.instances.size(); ++k)
    for (const Run& r : a.instances[k].runs())
      std::fill_n(labels.begin() + r.start, r.length, static_cast<std::uint16_t>(k + 1));
  return labels;
}

namespace detail {

inline FrameAnnotation annotation_from_pgm(const std::string& bytes, const std::string& what) {
  std::size_t pos = 2;
  auto next_token = [&]() -> std::int64_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::int64_t v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
      if (v > (std::int64_t{1} << 31)) throw FormatError(what + ": PGM header value too large");
    }
    if (!any) throw FormatError(what + ": malformed PGM header");
    return v;
  };
  const std::int64_t width = next_token();
  const std::int64_t height = next_token();
  const std::int64_t maxval = next_token();
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw FormatError(what + ": malformed PGM header");
  ++pos;
  if (maxval < 1 || maxval > 65535) throw FormatError(what + ": PGM maxval out of range");
  FrameGeometry geo{width, height};
  validate(geo);
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  const auto n = static_cast<std::size_t>(geo.pixel_count());
  if (bytes.size() - pos < n * bpp) throw FormatError(what + ": PGM pixel data truncated");

  std::map<std::uint32_t, RunBuilder> builders;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t v = static_cast<unsigned char>(bytes[pos + i * bpp]);
    if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(bytes[pos + i * bpp + 1]);
    if (v == 0) continue;
    builders.try_emplace(v, geo).first->second.append(static_cast<std::int64_t>(i), 1);
  }
  FrameAnnotation a;
  a.geometry = geo;
  for (auto& [label, builder] : builders) a.instances.push_back(std::move(builder).build());
  return a;
}

}  // namespace detail

// Format is detected from content: "P5" for label images, JSON otherwise.
// Label images take their frame id from the file stem.
inline FrameAnnotation load_annotations(const fs::path& path) {
  const std::string bytes = read_file(path);
  const std::string what = path.string();
  FrameAnnotation a;
  if (bytes.rfind("P5", 0) == 0) {
    a = detail::annotation_from_pgm(bytes, what);
    a.id = path.stem().string();
  } else {
    const std::size_t first = bytes.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || bytes[first] != '{')
      throw FormatError(what + ": unknown annotation format (expected 16-bit PGM or JSON)");
    const Json j = parse_json(bytes, what);
    if (json_get<std::string>(j, "format", what) != kAnnotationFormat)
      throw FormatError(what + ": unsupported annotation format tag");
    a.id = json_get<std::string>(j, "frame", what);
    a.geometry = geometry_from_json(j, what);
    const Json& inst = j.at("instances");
    if (!inst.is_array()) throw FormatError(what + ": instances must be a list");
    for (std::size_t k = 0; k < inst.size(); ++k)
      a.instances.push_back(mask_from_json(inst[k], a.geometry, what + " instance " + std::to_string(k)));
  }
  validate(a);
  return a;
}

// ---------------------------------------------------------------------------
// Proposals

struct FrameProposals {
  std::string frame_id;
  std::vector<Proposal> proposals;  // score-descending, ties in file order
};

inline std::string proposals_to_jsonl(const std::string& frame_id, std::span<const Proposal> proposals) {
  std::string out;
  for (const Proposal& p : proposals) {
    Json j;
    j["frame"] = frame_id;
    j["score"] = p.score;
    j["width"] = p.mask.geometry().width;
    j["height"] = p.mask.geometry().height;
    j["runs"] = runs_to_json(p.mask);
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline void write_proposals(const fs::path& path, const std::string& frame_id, std::span<const Proposal> proposals) {
  write_file(path, proposals_to_jsonl(frame_id, proposals));
}

inline std::vector<FrameProposals> parse_proposals(const std::string& text, const std::string& what) {
  std::vector<FrameProposals> frames;
  std::map<std::string, std::size_t> slot;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = what + ":" + std::to_string(line_no);
    const Json j = parse_json(line, where);
    const auto frame = json_get<std::string>(j, "frame", where);
    const auto score = json_get<double>(j, "score", where);
    if (!(score >= 0.0 && score <= 1.0)) throw ValidationError(where + ": score " + std::to_string(score) + " outside [0, 1]");
    const FrameGeometry geo = geometry_from_json(j, where);
    if (!j.contains("runs")) throw FormatError(where + ": missing field 'runs'");
    BinaryMask mask = mask_from_json(j.at("runs"), geo, where);
    auto [it, inserted] = slot.try_emplace(frame, frames.size());
    if (inserted) frames.push_back({frame, {}});
    auto& list = frames[it->second].proposals;
    if (!list.empty() && !(list.front().mask.geometry() == geo))
      throw GeometryError(where + ": geometry " + to_string(geo) + " differs from earlier proposals of frame " + frame);
    list.push_back({std::move(mask), score});
  }
  for (auto& f : frames) {
    std::stable_sort(f.proposals.begin(), f.proposals.end(),
                     [](const Proposal& a, const Proposal& b) { return a.score > b.score; });
  }
  return frames;
}

inline std::vector<FrameProposals> load_proposals(const fs::path& path) {
  return parse_proposals(read_file(path), path.string());
}

// Proposals of one frame from a file; empty when the frame has none.
inline std::vector<Proposal> load_frame_proposals(const fs::path& path, const std::string& frame_id,
                                                  FrameGeometry expected) {
  for (auto& f : load_proposals(path)) {
    if (f.frame_id != frame_id) continue;
    if (!f.proposals.empty() && !(f.proposals.front().mask.geometry() == expected))
      throw GeometryError(path.string() + ": proposals of frame " + frame_id + " have geometry " +
                          to_string(f.proposals.front().mask.geometry()) + ", annotation has " + to_string(expected));
    return std::move(f.proposals);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Dataset index

struct IndexEntry {
  std::string id;
  Stage stage = Stage::TestStage1;
  fs::path annotation;  // resolved against the index location
  fs::path proposals;

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

struct DatasetIndex {
  std::vector<IndexEntry> frames;
  std::string provenance;
};

inline std::string index_to_json(const DatasetIndex& index, const fs::path& index_dir) {
  Json j;
  j["format"] = kIndexFormat;
  j["provenance"] = index.provenance;
  j["frames"] = Json::array();
  for (const IndexEntry& e : index.frames) {
    Json f;
    f["id"] = e.id;
    f["stage"] = std::string(stage_name(e.stage));
    f["annotation"] = fs::proximate(e.annotation, index_dir).generic_string();
    f["proposals"] = fs::proximate(e.proposals, index_dir).generic_string();
    j["frames"].push_back(std::move(f));
  }
  return j.dump(2) + "\n";
}

inline void write_index(const fs::path& path, const DatasetIndex& index) {
  const fs::path dir = fs::absolute(path).parent_path();
  std::error_code ec;
  fs::create_directories(dir, ec);
  write_file(path, index_to_json(index, dir));
}

inline DatasetIndex load_index(const fs::path& path) {
  const std::string what = path.string();
  const Json j = parse_json(read_file(path), what);
  if (json_get<std::string>(j, "format", what) != kIndexFormat) throw FormatError(what + ": unsupported index format tag");
  DatasetIndex index;
  if (j.contains("provenance")) index.provenance = json_get<std::string>(j, "provenance", what);
  const fs::path base = fs::absolute(path).parent_path();
  std::set<std::string> seen;
  const Json& frames = j.at("frames");
  if (!frames.is_array()) throw FormatError(what + ": frames must be a list");
  for (const Json& f : frames) {
    IndexEntry e;
    e.id = json_get<std::string>(f, "id", what);
    e.stage = parse_stage(json_get<std::string>(f, "stage", what));
    e.annotation = (base / json_get<std::string>(f, "annotation", what)).lexically_normal();
    e.proposals = (base / json_get<std::string>(f, "proposals", what)).lexically_normal();
    if (!seen.insert(e.id).second) throw ValidationError(what + ": duplicate frame id " + e.id);
    for (const fs::path& p : {e.annotation, e.proposals})
      if (!fs::exists(p)) throw ValidationError(what + ": frame " + e.id + " references missing file " + p.string());
    index.frames.push_back(std::move(e));
  }
  return index;
}

// ---------------------------------------------------------------------------
// Manifest (synthetic proposal -> gt correspondence, for tests only)

struct ManifestEntry {
  std::string id;
  std::vector<int> source;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline std::string manifest_to_json(const std::vector<ManifestEntry>& entries, std::uint64_t seed) {
  Json j;
  j["format"] = kManifestFormat;
  j["random_scheme"] = "mt64-v1";
  j["seed"] = seed;
  j["frames"] = Json::array();
  for (const ManifestEntry& e : entries) j["frames"].push_back(Json{{"id", e.id}, {"source", e.source}});
  return j.dump() + "\n";
}

inline std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  const std::string what = path.string();
  const Json j = parse_json(read_file(path), what);
  if (json_get<std::string>(j, "format", what) != kManifestFormat) throw FormatError(what + ": unsupported manifest format tag");
  std::vector<ManifestEntry> out;
  for (const Json& f : j.at("frames"))
    out.push_back({json_get<std::string>(f, "id", what), json_get<std::vector<int>>(f, "source", what)});
  return out;
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { Structured, Tabular };

inline Json report_to_json(const MetricReport& report) {
  Json j;
  j["format"] = kReportFormat;
  j["per_stage"] = Json::array();
  for (const StageReport& s : report.per_stage) {
    Json e;
    e["stage"] = std::string(stage_name(s.stage));
    e["frames"] = s.frame_count;
    e["gt_instances"] = s.gt_count;
    if (s.q05_mi_dsc) e["q05_mi_dsc"] = *s.q05_mi_dsc;
    if (s.mean_mi_dsc) e["mean_mi_dsc"] = *s.mean_mi_dsc;
    if (s.q05_mi_nsd) e["q05_mi_nsd"] = *s.q05_mi_nsd;
    if (s.mean_mi_nsd) e["mean_mi_nsd"] = *s.mean_mi_nsd;
    e["average_recall"] = Json::array();
    for (const auto& [budget, ar] : s.average_recall) e["average_recall"].push_back(Json{{"budget", budget}, {"ar", ar}});
    e["recall_curves"] = Json::object();
    for (const auto& [bin, curve] : s.recall_curves) {
      Json c = Json::array();
      for (const auto& [t, r] : curve) c.push_back(Json::array({t, r}));
      e["recall_curves"][std::string(size_bin_name(bin))] = std::move(c);
    }
    j["per_stage"].push_back(std::move(e));
  }
  j["per_frame"] = Json::array();
  for (const FrameScore& f : report.per_frame) {
    Json e;
    e["frame"] = f.frame_id;
    e["stage"] = std::string(stage_name(f.stage));
    if (f.mi_dsc) e["mi_dsc"] = *f.mi_dsc;
    if (f.mi_nsd) e["mi_nsd"] = *f.mi_nsd;
    j["per_frame"].push_back(std::move(e));
  }
  return j;
}

inline MetricReport report_from_json(const Json& j, const std::string& what) {
  if (json_get<std::string>(j, "format", what) != kReportFormat) throw FormatError(what + ": unsupported report format tag");
  auto opt = [&](const Json& e, const char* key) -> std::optional<double> {
    if (!e.contains(key)) return std::nullopt;
    return json_get<double>(e, key, what);
  };
  MetricReport r;
  for (const Json& e : j.at("per_stage")) {
    StageReport s;
    s.stage = parse_stage(json_get<std::string>(e, "stage", what));
    s.frame_count = json_get<std::size_t>(e, "frames", what);
    s.gt_count = json_get<std::size_t>(e, "gt_instances", what);
    s.q05_mi_dsc = opt(e, "q05_mi_dsc");
    s.mean_mi_dsc = opt(e, "mean_mi_dsc");
    s.q05_mi_nsd = opt(e, "q05_mi_nsd");
    s.mean_mi_nsd = opt(e, "mean_mi_nsd");
    for (const Json& a : e.at("average_recall"))
      s.average_recall.emplace_back(json_get<std::size_t>(a, "budget", what), json_get<double>(a, "ar", what));
    for (const auto& [name, curve] : e.at("recall_curves").items()) {
      RecallCurve c;
      for (const Json& point : curve) c.emplace_back(point.at(0).get<double>(), point.at(1).get<double>());
      s.recall_curves[parse_size_bin(name)] = std::move(c);
    }
    r.per_stage.push_back(std::move(s));
  }
  for (const Json& e : j.at("per_frame")) {
    r.per_frame.push_back({json_get<std::string>(e, "frame", what), parse_stage(json_get<std::string>(e, "stage", what)),
                           opt(e, "mi_dsc"), opt(e, "mi_nsd")});
  }
  return r;
}

// Stage rows; MI columns are 5% quantiles and means, then AR columns in
// budget order.
inline std::string report_to_table(const MetricReport& report) {
  std::vector<std::size_t> budgets;
  for (const StageReport& s : report.per_stage)
    for (const auto& [b, ar] : s.average_recall)
      if (std::find(budgets.begin(), budgets.end(), b) == budgets.end()) budgets.push_back(b);

  auto cell = [](std::optional<double> v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return std::string(buf);
  };
  std::string out = "stage\tframes\tq05_MI_DSC\tq05_MI_NSD\tmean_MI_DSC\tmean_MI_NSD";
  for (std::size_t b : budgets) out += "\tAR@" + std::to_string(b);
  out += "\n";
  for (const StageReport& s : report.per_stage) {
    out += std::string(stage_name(s.stage)) + "\t" + std::to_string(s.frame_count) + "\t" + cell(s.q05_mi_dsc) + "\t" +
           cell(s.q05_mi_nsd) + "\t" + cell(s.mean_mi_dsc) + "\t" + cell(s.mean_mi_nsd);
    for (std::size_t b : budgets) {
      std::optional<double> v;
      for (const auto& [bb, ar] : s.average_recall)
        if (bb == b) v = ar;
      out += "\t" + cell(v);
    }
    out += "\n";
  }
  return out;
}

inline std::string format_report(const MetricReport& report, ReportFormat format) {
  if (format == ReportFormat::Tabular) return report_to_table(report);
  return report_to_json(report).dump(2) + "\n";
}

inline void write_report(const MetricReport& report, const fs::path& path, ReportFormat format) {
  write_file(path, format_report(report, format));
}

inline MetricReport load_report(const fs::path& path) {
  return report_from_json(parse_json(read_file(path), path.string()), path.string());
}

}  // namespace propseg
