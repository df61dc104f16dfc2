#pragma once

// propseg command-line surface: synth, merge, eval, oracle, render.
//
// Exit status: 0 success, 2 invalid input or usage, 1 anything else.
// Diagnostics go to stderr; results go to files or stdout.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "propseg/propseg.hpp"

namespace propseg::cli {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
};

inline RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig rc = g.config_path.empty() ? RunConfig{} : load_run_config(g.config_path);
  if (g.workers) rc.workers = *g.workers;
  if (g.seed) rc.seed = *g.seed;
  if (rc.workers == 0) rc.workers = 1;
  return rc;
}

inline void refuse_overwrite(const fs::path& out, const std::vector<fs::path>& inputs) {
  const fs::path o = fs::weakly_canonical(out);
  for (const fs::path& in : inputs) {
    if (fs::weakly_canonical(in) == o) throw ValidationError("refusing to overwrite input file " + in.string());
  }
}

inline std::vector<fs::path> input_files(const fs::path& index_path, const DatasetIndex& index) {
  std::vector<fs::path> files{index_path};
  for (const IndexEntry& e : index.frames) {
    files.push_back(e.annotation);
    files.push_back(e.proposals);
  }
  return files;
}

struct FrameData {
  FrameAnnotation annotation;
  std::vector<Proposal> proposals;
};

inline FrameData load_frame(const IndexEntry& e) {
  FrameData d;
  d.annotation = load_annotations(e.annotation);
  d.annotation.id = e.id;
  d.annotation.stage = e.stage;
  d.proposals = load_frame_proposals(e.proposals, e.id, d.annotation.geometry);
  return d;
}

// Writes one proposal file per frame under out_dir/proposals plus a new index
// that reuses the original annotations.
template <typename Select>
void rewrite_proposals(const fs::path& index_path, const fs::path& out_dir, std::size_t workers,
                       const std::string& provenance, Select&& select) {
  const DatasetIndex index = load_index(index_path);
  const auto inputs = input_files(index_path, index);
  DatasetIndex out;
  out.provenance = provenance;
  for (const IndexEntry& e : index.frames) {
    IndexEntry n = e;
    n.proposals = fs::absolute(out_dir / "proposals" / (e.id + ".jsonl")).lexically_normal();
    refuse_overwrite(n.proposals, inputs);
    out.frames.push_back(std::move(n));
  }
  const fs::path out_index = out_dir / "index.json";
  refuse_overwrite(out_index, inputs);

  parallel_for(index.frames.size(), workers, [&](std::size_t i) {
    const FrameData d = load_frame(index.frames[i]);
    const std::vector<Proposal> selected = select(d);
    write_proposals(out.frames[i].proposals, index.frames[i].id, selected);
  });
  write_index(out_index, out);
}

inline int cmd_synth(const GlobalOptions& g, const std::string& out_dir, const std::string& preset,
                     std::optional<std::int64_t> frames_per_stage, bool label_images) {
  RunConfig rc = resolve_config(g);
  SynthConfig cfg = preset.empty() ? rc.synth : synth_preset(preset);
  if (rc.seed) cfg.seed = *rc.seed;
  if (frames_per_stage) cfg.frames_per_stage = {*frames_per_stage, *frames_per_stage, *frames_per_stage};
  validate(cfg);

  const SynthDataset ds = generate_dataset(cfg);
  const fs::path dir = fs::absolute(out_dir);
  DatasetIndex index;
  index.provenance = "synthetic; random scheme " + std::string(kRandomScheme) + "; seed " + std::to_string(cfg.seed);
  std::vector<ManifestEntry> manifest;
  for (const SynthFrame& f : ds.frames) {
    IndexEntry e;
    e.id = f.annotation.id;
    e.stage = f.annotation.stage;
    if (label_images) {
      e.annotation = dir / "annotations" / (e.id + ".pgm");
      write_file(e.annotation, label_image_to_pgm(f.annotation.geometry, labels_from_instances(f.annotation)));
    } else {
      e.annotation = dir / "annotations" / (e.id + ".json");
      write_annotation(e.annotation, f.annotation);
    }
    e.proposals = dir / "proposals" / (e.id + ".jsonl");
    write_proposals(e.proposals, e.id, f.proposals);
    index.frames.push_back(std::move(e));
    manifest.push_back({f.annotation.id, f.source});
  }
  write_index(dir / "index.json", index);
  write_file(dir / "manifest.json", manifest_to_json(manifest, cfg.seed));
  std::cerr << "[synth] " << ds.frames.size() << " frames, seed " << cfg.seed << ", geometry "
            << to_string(cfg.geometry) << " -> " << (dir / "index.json").string() << "\n";
  return 0;
}

inline int cmd_merge(const GlobalOptions& g, const std::string& index_path, const std::string& out_dir,
                     const MergeConfig& overrides, const std::vector<bool>& overridden) {
  RunConfig rc = resolve_config(g);
  MergeConfig m = rc.merge;
  if (overridden[0]) m.score_threshold = overrides.score_threshold;
  if (overridden[1]) m.min_group_size = overrides.min_group_size;
  if (overridden[2]) m.vote_fraction = overrides.vote_fraction;
  if (overridden[3]) m.overlap_min_iou = overrides.overlap_min_iou;
  validate(m);

  char header[256];
  std::snprintf(header, sizeof header,
                "[merge] score_threshold=%g min_group_size=%zu vote_fraction=%g (%g%%) overlap=%s\n",
                m.score_threshold, m.min_group_size, m.vote_fraction, m.vote_fraction * 100.0,
                m.overlap_min_iou > 0.0 ? ("iou>=" + std::to_string(m.overlap_min_iou)).c_str() : "any-pixel");
  std::cerr << header;

  std::atomic<std::size_t> in_total{0}, out_total{0};
  rewrite_proposals(index_path, out_dir, rc.workers, "merged proposals", [&](const FrameData& d) {
    const auto groups = run_pipeline(d.proposals, m);
    in_total += d.proposals.size();
    out_total += groups.size();
    return merged_proposals(groups);
  });
  const double removed =
      in_total == 0 ? 0.0 : 100.0 * (1.0 - static_cast<double>(out_total) / static_cast<double>(in_total));
  char summary[160];
  std::snprintf(summary, sizeof summary, "[merge] %zu proposals -> %zu instances (%.1f%% removed)\n",
                in_total.load(), out_total.load(), removed);
  std::cerr << summary;
  return 0;
}

inline int cmd_oracle(const GlobalOptions& g, const std::string& index_path, const std::string& out_dir) {
  RunConfig rc = resolve_config(g);
  rewrite_proposals(index_path, out_dir, rc.workers, "best proposal per ground-truth instance", [](const FrameData& d) {
    std::vector<Proposal> selected;
    for (const OracleMatch& m : oracle_select(d.annotation.instances, d.proposals))
      selected.push_back(d.proposals[m.proposal_index]);
    return selected;
  });
  std::cerr << "[oracle] wrote " << (fs::path(out_dir) / "index.json").string() << "\n";
  return 0;
}

inline MetricReport evaluate_index(const DatasetIndex& index, const EvalConfig& eval, std::size_t workers) {
  validate(eval);
  std::vector<FrameEvaluation> evals(index.frames.size());
  parallel_for(index.frames.size(), workers, [&](std::size_t i) {
    const FrameData d = load_frame(index.frames[i]);
    evals[i] = evaluate_frame(d.annotation, d.proposals, d.proposals, eval);
  });
  return build_report(evals, eval);
}

inline int cmd_eval(const GlobalOptions& g, const std::string& index_path, const std::string& out_path,
                    const std::string& table_path, std::optional<double> nsd_tolerance,
                    const std::vector<std::string>& metrics, const std::string& matcher,
                    std::optional<std::size_t> recall_budget) {
  RunConfig rc = resolve_config(g);
  if (!metrics.empty()) set_metrics(rc.eval, metrics);
  if (nsd_tolerance) rc.eval.nsd_tolerance = *nsd_tolerance;
  if (!matcher.empty()) rc.eval.matcher = parse_matcher(matcher);
  if (recall_budget) rc.eval.recall_budget = *recall_budget;
  validate(rc.eval);

  const DatasetIndex index = load_index(index_path);
  const auto inputs = input_files(index_path, index);
  if (!out_path.empty()) refuse_overwrite(out_path, inputs);
  if (!table_path.empty()) refuse_overwrite(table_path, inputs);

  const MetricReport report = evaluate_index(index, rc.eval, rc.workers);
  if (!out_path.empty()) write_report(report, out_path, ReportFormat::Structured);
  if (!table_path.empty()) write_report(report, table_path, ReportFormat::Tabular);
  std::cout << report_to_table(report);
  return 0;
}

inline int cmd_render(const GlobalOptions& g, const std::string& index_path, const std::string& frame_id,
                      const std::string& out_path, double found_iou, bool all_proposals) {
  (void)resolve_config(g);
  const DatasetIndex index = load_index(index_path);
  refuse_overwrite(out_path, input_files(index_path, index));
  const auto it = std::find_if(index.frames.begin(), index.frames.end(),
                               [&](const IndexEntry& e) { return e.id == frame_id; });
  if (it == index.frames.end()) throw ValidationError("frame " + frame_id + " not in " + index_path);
  const FrameData d = load_frame(*it);
  std::vector<BinaryMask> selected;
  if (all_proposals) {
    for (const Proposal& p : d.proposals) selected.push_back(p.mask);
  } else {
    for (const OracleMatch& m : oracle_select(d.annotation.instances, d.proposals))
      selected.push_back(d.proposals[m.proposal_index].mask);
  }
  render_overlay(d.annotation, selected, out_path, found_iou);
  std::cerr << "[render] " << frame_id << " -> " << out_path << "\n";
  return 0;
}

inline int run(int argc, const char* const* argv) {
  CLI::App app{"Proposal merging and instance segmentation evaluation", "propseg"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Run configuration file (JSON)");
  app.add_option("--workers", g.workers, "Worker threads (a hint; results do not depend on it)");
  app.add_option("--seed", g.seed, "Random seed for synth");

  std::string out, index, preset, table, frame, matcher;
  std::optional<std::int64_t> frames_per_stage;
  bool label_images = false, all_proposals = false;
  std::optional<double> nsd_tolerance;
  std::optional<std::size_t> recall_budget;
  std::vector<std::string> metrics;
  double found_iou = 0.5;
  MergeConfig merge_overrides;
  std::vector<bool> overridden(4, false);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with ranked proposal streams");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--preset", preset, "default | zero-jitter (overrides config.synth)");
  synth->add_option("--frames-per-stage", frames_per_stage, "Frames in each of the three stages");
  synth->add_flag("--label-images", label_images, "Write annotations as 16-bit PGM label images");

  auto* merge = app.add_subcommand("merge", "Filter, group and fuse proposals into final instances");
  merge->add_option("--index", index, "Dataset index")->required();
  merge->add_option("--out", out, "Output directory")->required();
  auto* o_thr = merge->add_option("--score-threshold", merge_overrides.score_threshold, "Objectness filter");
  auto* o_min = merge->add_option("--min-group-size", merge_overrides.min_group_size, "Smallest surviving group");
  auto* o_vote = merge->add_option("--vote-fraction", merge_overrides.vote_fraction, "Pixel vote fraction");
  auto* o_iou = merge->add_option("--overlap-min-iou", merge_overrides.overlap_min_iou, "0 = any shared pixel");

  auto* eval = app.add_subcommand("eval", "Compute MI_DSC, MI_NSD, AR and size-binned recall");
  eval->add_option("--index", index, "Dataset index")->required();
  eval->add_option("--out", out, "Structured report (JSON)");
  eval->add_option("--table", table, "Tabular report (TSV)");
  eval->add_option("--nsd-tolerance", nsd_tolerance, "Surface Dice tolerance in pixels (required for mi_nsd)");
  eval->add_option("--metrics", metrics, "Subset of: mi_dsc mi_nsd ar")->delimiter(',');
  eval->add_option("--matcher", matcher, "optimal | greedy");
  eval->add_option("--recall-budget", recall_budget, "Proposal budget for size-binned recall curves");

  auto* oracle = app.add_subcommand("oracle", "Select the best proposal per ground-truth instance");
  oracle->add_option("--index", index, "Dataset index")->required();
  oracle->add_option("--out", out, "Output directory")->required();

  auto* render = app.add_subcommand("render", "Draw found and missed instances of one frame (PPM)");
  render->add_option("--index", index, "Dataset index")->required();
  render->add_option("--frame", frame, "Frame id")->required();
  render->add_option("--out", out, "Output image (.ppm)")->required();
  render->add_option("--found-iou", found_iou, "IoU at which an instance counts as found");
  render->add_flag("--all", all_proposals, "Consider every proposal instead of the best per instance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(g, out, preset, frames_per_stage, label_images);
    if (*merge) {
      overridden = {o_thr->count() > 0, o_min->count() > 0, o_vote->count() > 0, o_iou->count() > 0};
      return cmd_merge(g, index, out, merge_overrides, overridden);
    }
    if (*eval) return cmd_eval(g, index, out, table, nsd_tolerance, metrics, matcher, recall_budget);
    if (*oracle) return cmd_oracle(g, index, out);
    if (*render) return cmd_render(g, index, frame, out, found_iou, all_proposals);
  } catch (const ValidationError& e) {
    std::cerr << "propseg: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "propseg: internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace propseg::cli
