#pragma once

// Run configuration file (JSON). Every section and key is optional; unknown
// keys are rejected so typos do not silently fall back to defaults.
//
//   {
//     "workers": 4,
//     "seed": 7,
//     "merge": {"score_threshold": 0.8, "min_group_size": 5,
//               "vote_fraction": 0.1, "overlap_min_iou": 0.0},
//     "eval":  {"metrics": ["mi_dsc", "mi_nsd", "ar"], "nsd_tolerance": 3,
//               "ar_budgets": [1, 10, 100], "iou_grid": [0.5, ...],
//               "recall_budget": 100, "matcher": "optimal"},
//     "synth": {"preset": "default", "width": 256, "height": 192, ...}
//   }

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "propseg/error.hpp"
#include "propseg/io.hpp"
#include "propseg/metrics.hpp"
#include "propseg/postproc.hpp"
#include "propseg/synth.hpp"

namespace propseg {

struct RunConfig {
  MergeConfig merge;
  EvalConfig eval;
  std::size_t workers = 1;
  std::optional<std::uint64_t> seed;
  SynthConfig synth;
};

namespace config_detail {

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw FormatError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& into, const std::string& where) {
  if (j.contains(key)) into = json_get<T>(j, key, where);
}

inline void read_range(const Json& j, const char* key, IntRange& into, const std::string& where) {
  if (!j.contains(key)) return;
  const auto v = json_get<std::vector<std::int64_t>>(j, key, where);
  if (v.size() != 2) throw FormatError(where + ": '" + std::string(key) + "' must be [lo, hi]");
  into = {v[0], v[1]};
}

inline void read_score(const Json& j, const char* key, ScoreModel& into, const std::string& where) {
  if (!j.contains(key)) return;
  const auto v = json_get<std::vector<double>>(j, key, where);
  if (v.size() != 2) throw FormatError(where + ": '" + std::string(key) + "' must be [mean, spread]");
  into = {v[0], v[1]};
}

}  // namespace config_detail

inline SynthConfig synth_preset(const std::string& name) {
  if (name == "default") return SynthConfig{};
  if (name == "zero-jitter") return SynthConfig::zero_jitter();
  throw ValidationError("unknown synth preset '" + name + "' (expected default or zero-jitter)");
}

inline SynthConfig synth_config_from_json(const Json& j) {
  using namespace config_detail;
  const std::string where = "config.synth";
  reject_unknown(j,
                 {"preset", "seed", "width", "height", "instruments_per_frame", "size_bin_mix", "cluster_size",
                  "jitter_shift", "jitter_morph", "distractors_per_frame", "min_proposals_per_frame", "true_scores",
                  "distractor_scores", "miss_rate", "min_gap", "frames_per_stage"},
                 where);
  SynthConfig c = synth_preset(j.contains("preset") ? json_get<std::string>(j, "preset", where) : "default");
  read(j, "seed", c.seed, where);
  read(j, "width", c.geometry.width, where);
  read(j, "height", c.geometry.height, where);
  read_range(j, "instruments_per_frame", c.instruments_per_frame, where);
  read(j, "size_bin_mix", c.size_bin_mix, where);
  read_range(j, "cluster_size", c.cluster_size, where);
  read(j, "jitter_shift", c.jitter_shift, where);
  read(j, "jitter_morph", c.jitter_morph, where);
  read_range(j, "distractors_per_frame", c.distractors_per_frame, where);
  read(j, "min_proposals_per_frame", c.min_proposals_per_frame, where);
  read_score(j, "true_scores", c.true_scores, where);
  read_score(j, "distractor_scores", c.distractor_scores, where);
  read(j, "miss_rate", c.miss_rate, where);
  read(j, "min_gap", c.min_gap, where);
  read(j, "frames_per_stage", c.frames_per_stage, where);
  validate(c);
  return c;
}

inline Matcher parse_matcher(const std::string& name) {
  if (name == "optimal") return Matcher::Optimal;
  if (name == "greedy") return Matcher::Greedy;
  throw ValidationError("unknown matcher '" + name + "' (expected optimal or greedy)");
}

// Replaces the enabled metric set. Names: mi_dsc, mi_nsd, ar.
inline void set_metrics(EvalConfig& eval, const std::vector<std::string>& names) {
  eval.mi_dsc = eval.mi_nsd = eval.ar = false;
  for (const std::string& n : names) {
    if (n == "mi_dsc") {
      eval.mi_dsc = true;
    } else if (n == "mi_nsd") {
      eval.mi_nsd = true;
    } else if (n == "ar") {
      eval.ar = true;
    } else {
      throw ValidationError("unknown metric '" + n + "' (expected mi_dsc, mi_nsd or ar)");
    }
  }
}

inline RunConfig run_config_from_json(const Json& j) {
  using namespace config_detail;
  reject_unknown(j, {"workers", "seed", "merge", "eval", "synth"}, "config");
  RunConfig rc;
  read(j, "workers", rc.workers, "config");
  if (j.contains("seed")) rc.seed = json_get<std::uint64_t>(j, "seed", "config");
  if (j.contains("merge")) {
    const Json& m = j.at("merge");
    reject_unknown(m, {"score_threshold", "min_group_size", "vote_fraction", "overlap_min_iou"}, "config.merge");
    read(m, "score_threshold", rc.merge.score_threshold, "config.merge");
    read(m, "min_group_size", rc.merge.min_group_size, "config.merge");
    read(m, "vote_fraction", rc.merge.vote_fraction, "config.merge");
    read(m, "overlap_min_iou", rc.merge.overlap_min_iou, "config.merge");
    validate(rc.merge);
  }
  if (j.contains("eval")) {
    const Json& e = j.at("eval");
    const std::string where = "config.eval";
    reject_unknown(e, {"metrics", "nsd_tolerance", "ar_budgets", "iou_grid", "recall_budget", "matcher"}, where);
    if (e.contains("metrics")) set_metrics(rc.eval, json_get<std::vector<std::string>>(e, "metrics", where));
    if (e.contains("nsd_tolerance")) rc.eval.nsd_tolerance = json_get<double>(e, "nsd_tolerance", where);
    read(e, "ar_budgets", rc.eval.ar_budgets, where);
    read(e, "iou_grid", rc.eval.iou_grid, where);
    read(e, "recall_budget", rc.eval.recall_budget, where);
    if (e.contains("matcher")) rc.eval.matcher = parse_matcher(json_get<std::string>(e, "matcher", where));
  }
  if (j.contains("synth")) rc.synth = synth_config_from_json(j.at("synth"));
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(parse_json(read_file(path), path.string()));
}

}  // namespace propseg
