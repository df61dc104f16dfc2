#pragma once

// Evaluation: multi-instance Dice / surface Dice with optimal instance
// matching, proposal recall and average recall, size-binned recall curves, the
// best-proposal oracle and per-stage aggregation with 5% quantiles.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "propseg/boundary.hpp"
#include "propseg/error.hpp"
#include "propseg/hungarian.hpp"
#include "propseg/mask.hpp"
#include "propseg/postproc.hpp"

namespace propseg {

enum class Stage { Train, Val, TestStage1, TestStage2, TestStage3 };

inline constexpr std::array<Stage, 5> kAllStages = {Stage::Train, Stage::Val, Stage::TestStage1, Stage::TestStage2,
                                                    Stage::TestStage3};

inline std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Train: return "train";
    case Stage::Val: return "val";
    case Stage::TestStage1: return "stage1";
    case Stage::TestStage2: return "stage2";
    case Stage::TestStage3: return "stage3";
  }
  return "unknown";
}

inline Stage parse_stage(std::string_view name) {
  for (Stage s : kAllStages) {
    if (stage_name(s) == name) return s;
  }
  throw FormatError("unknown stage '" + std::string(name) + "' (expected train, val, stage1, stage2 or stage3)");
}

struct FrameAnnotation {
  std::string id;
  FrameGeometry geometry{};
  std::vector<BinaryMask> instances;  // pairwise disjoint, may be empty
  Stage stage = Stage::TestStage1;
};

inline void validate(const FrameAnnotation& a) {
  validate(a.geometry);
  for (std::size_t i = 0; i < a.instances.size(); ++i) {
    if (!(a.instances[i].geometry() == a.geometry))
      throw GeometryError("frame " + a.id + ": instance " + std::to_string(i) + " has geometry " +
                          to_string(a.instances[i].geometry()) + ", frame is " + to_string(a.geometry));
    for (std::size_t j = 0; j < i; ++j) {
      if (overlaps(a.instances[i], a.instances[j]))
        throw ValidationError("frame " + a.id + ": instances " + std::to_string(j) + " and " + std::to_string(i) +
                              " overlap");
    }
  }
}

// ---------------------------------------------------------------------------
// Instance matching

struct MatchKernel {
  enum class Kind { Dsc, Nsd, Iou };
  Kind kind = Kind::Dsc;
  double tolerance = 0.0;  // NSD only

  static MatchKernel dice() { return {Kind::Dsc, 0.0}; }
  static MatchKernel surface_dice(double tolerance) { return {Kind::Nsd, tolerance}; }
  static MatchKernel intersection_over_union() { return {Kind::Iou, 0.0}; }

  double operator()(const BinaryMask& gt, const BinaryMask& pred) const {
    switch (kind) {
      case Kind::Dsc: return dsc(gt, pred);
      case Kind::Iou: return iou(gt, pred);
      case Kind::Nsd: return propseg::surface_dice(pred, gt, tolerance);
    }
    return 0.0;
  }
};

enum class Matcher { Optimal, Greedy };

struct MatchPair {
  std::size_t gt = 0;
  std::size_t pred = 0;
  double score = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // ordered by gt index
  std::vector<std::size_t> unmatched_gt;
  std::vector<std::size_t> unmatched_pred;

  double total_score() const {
    double s = 0.0;
    for (const MatchPair& p : pairs) s += p.score;
    return s;
  }
};

namespace detail {

// Chebyshev gap between two boxes; negative or zero when they overlap.
inline std::int64_t box_gap(const BoundingBox& a, const BoundingBox& b) {
  const std::int64_t dr = std::max(a.row_min - b.row_max, b.row_min - a.row_max);
  const std::int64_t dc = std::max(a.col_min - b.col_max, b.col_min - a.col_max);
  return std::max(dr, dc);
}

}  // namespace detail

// Row-major |gt| x |pred| kernel scores. Pairs whose boxes are provably too
// far apart to score are skipped.
inline std::vector<double> score_matrix(std::span<const BinaryMask> gt, std::span<const BinaryMask> pred,
                                        const MatchKernel& kernel) {
  std::vector<double> m(gt.size() * pred.size(), 0.0);
  std::vector<BoundingBox> pred_boxes(pred.size());
  for (std::size_t j = 0; j < pred.size(); ++j) pred_boxes[j] = pred[j].bounding_box();
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const BoundingBox gb = gt[i].bounding_box();
    for (std::size_t j = 0; j < pred.size(); ++j) {
      require_same_geometry(gt[i], pred[j]);
      if (!gb.empty() && !pred_boxes[j].empty()) {
        const auto gap = static_cast<double>(detail::box_gap(gb, pred_boxes[j]));
        const double reach = kernel.kind == MatchKernel::Kind::Nsd ? kernel.tolerance : 0.0;
        if (gap > reach) continue;
      }
      m[i * pred.size() + j] = kernel(gt[i], pred[j]);
    }
  }
  return m;
}

inline MatchResult match_from_scores(const std::vector<double>& scores, std::size_t n_gt, std::size_t n_pred,
                                     Matcher matcher = Matcher::Optimal) {
  std::vector<int> gt_to_pred(n_gt, -1);
  if (matcher == Matcher::Optimal) {
    gt_to_pred = max_score_assignment(scores, n_gt, n_pred);
  } else {
    struct Candidate {
      double score;
      std::size_t gt, pred;
    };
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < n_gt; ++i)
      for (std::size_t j = 0; j < n_pred; ++j)
        if (scores[i * n_pred + j] > 0.0) cands.push_back({scores[i * n_pred + j], i, j});
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    std::vector<char> pred_used(n_pred, 0);
    for (const Candidate& c : cands) {
      if (gt_to_pred[c.gt] >= 0 || pred_used[c.pred]) continue;
      gt_to_pred[c.gt] = static_cast<int>(c.pred);
      pred_used[c.pred] = 1;
    }
  }

  MatchResult result;
  std::vector<char> pred_matched(n_pred, 0);
  for (std::size_t i = 0; i < n_gt; ++i) {
    const int j = gt_to_pred[i];
    if (j >= 0 && scores[i * n_pred + static_cast<std::size_t>(j)] > 0.0) {
      result.pairs.push_back({i, static_cast<std::size_t>(j), scores[i * n_pred + static_cast<std::size_t>(j)]});
      pred_matched[static_cast<std::size_t>(j)] = 1;
    } else {
      result.unmatched_gt.push_back(i);
    }
  }
  for (std::size_t j = 0; j < n_pred; ++j)
    if (!pred_matched[j]) result.unmatched_pred.push_back(j);
  return result;
}

inline MatchResult match_instances(std::span<const BinaryMask> gt, std::span<const BinaryMask> pred,
                                   const MatchKernel& kernel, Matcher matcher = Matcher::Optimal) {
  return match_from_scores(score_matrix(gt, pred, kernel), gt.size(), pred.size(), matcher);
}

// Sum of matched kernel scores over max(|gt|, |pred|); 1 when both are empty.
inline double mi_score_frame(std::span<const BinaryMask> gt, std::span<const BinaryMask> pred,
                             const MatchKernel& kernel, Matcher matcher = Matcher::Optimal) {
  if (gt.empty() && pred.empty()) return 1.0;
  const MatchResult m = match_instances(gt, pred, kernel, matcher);
  return m.total_score() / static_cast<double>(std::max(gt.size(), pred.size()));
}

// ---------------------------------------------------------------------------
// Optimal-ranking oracle

struct OracleMatch {
  std::size_t gt_index = 0;
  std::size_t proposal_index = 0;
  double iou = 0.0;
};

// Best proposal per gt instance by IoU (ties: higher score, then lower
// index). A gt that no proposal touches stays unpaired.
inline std::vector<OracleMatch> oracle_select(std::span<const BinaryMask> gt, std::span<const Proposal> proposals) {
  std::vector<OracleMatch> out;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    std::optional<OracleMatch> best;
    for (std::size_t j = 0; j < proposals.size(); ++j) {
      const double v = iou(gt[i], proposals[j].mask);
      if (v <= 0.0) continue;
      if (!best || v > best->iou || (v == best->iou && proposals[j].score > proposals[best->proposal_index].score)) {
        best = OracleMatch{i, j, v};
      }
    }
    if (best) out.push_back(*best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Proposal recall

inline constexpr std::size_t kArThresholdCount = 10;

// 0.50, 0.55, ..., 0.95
inline std::vector<double> default_iou_grid() {
  std::vector<double> grid;
  for (int k = 0; k < static_cast<int>(kArThresholdCount); ++k) grid.push_back((50.0 + 5.0 * k) / 100.0);
  return grid;
}

// IoU of each gt instance against the first `limit` ranked proposals.
struct IouTable {
  std::size_t gt_count = 0;
  std::size_t proposal_count = 0;
  std::vector<double> values;  // row-major gt x proposal

  double at(std::size_t g, std::size_t p) const { return values[g * proposal_count + p]; }
};

inline IouTable iou_table(std::span<const BinaryMask> gt, std::span<const Proposal> ranked, std::size_t limit) {
  IouTable t;
  t.gt_count = gt.size();
  t.proposal_count = std::min(limit, ranked.size());
  t.values.assign(t.gt_count * t.proposal_count, 0.0);
  std::vector<BoundingBox> boxes(t.proposal_count);
  for (std::size_t p = 0; p < t.proposal_count; ++p) boxes[p] = ranked[p].mask.bounding_box();
  for (std::size_t g = 0; g < t.gt_count; ++g) {
    const BoundingBox gb = gt[g].bounding_box();
    for (std::size_t p = 0; p < t.proposal_count; ++p) {
      require_same_geometry(gt[g], ranked[p].mask);
      if (!gb.empty() && !boxes[p].empty() && detail::box_gap(gb, boxes[p]) > 0) continue;
      t.values[g * t.proposal_count + p] = iou(gt[g], ranked[p].mask);
    }
  }
  return t;
}

// Greedy one-to-one matching by descending IoU among the top `budget`
// proposals; returns which gt instances found a partner with IoU >= threshold.
inline std::vector<char> greedy_hits(const IouTable& table, std::size_t budget, double threshold) {
  const std::size_t n = std::min(budget, table.proposal_count);
  struct Candidate {
    double iou;
    std::size_t gt, prop;
  };
  std::vector<Candidate> cands;
  for (std::size_t g = 0; g < table.gt_count; ++g)
    for (std::size_t p = 0; p < n; ++p)
      if (table.at(g, p) >= threshold && table.at(g, p) > 0.0) cands.push_back({table.at(g, p), g, p});
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.gt != b.gt) return a.gt < b.gt;
    return a.prop < b.prop;
  });
  std::vector<char> hit(table.gt_count, 0);
  std::vector<char> used(n, 0);
  for (const Candidate& c : cands) {
    if (hit[c.gt] || used[c.prop]) continue;
    hit[c.gt] = 1;
    used[c.prop] = 1;
  }
  return hit;
}

namespace detail {

inline void require_parallel(std::span<const FrameAnnotation> gt_all, std::span<const std::vector<Proposal>> props) {
  if (gt_all.size() != props.size())
    throw ValidationError("annotation and proposal lists differ in frame count");
}

inline void require_budget(std::size_t n) {
  if (n < 1) throw ValidationError("proposal budget must be at least 1");
}

}  // namespace detail

// Fraction of all gt instances recovered at the given budget and IoU
// threshold. A frame set without any gt instance has recall 1.
inline double recall_at(std::span<const FrameAnnotation> gt_all, std::span<const std::vector<Proposal>> proposals,
                        std::size_t n, double iou_threshold) {
  detail::require_parallel(gt_all, proposals);
  detail::require_budget(n);
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw ValidationError("IoU threshold must lie in (0, 1]");
  std::size_t found = 0, total = 0;
  for (std::size_t f = 0; f < gt_all.size(); ++f) {
    const IouTable t = iou_table(gt_all[f].instances, proposals[f], n);
    for (char h : greedy_hits(t, n, iou_threshold)) found += h ? 1 : 0;
    total += gt_all[f].instances.size();
  }
  if (total == 0) return 1.0;
  return static_cast<double>(found) / static_cast<double>(total);
}

inline double average_recall(std::span<const FrameAnnotation> gt_all, std::span<const std::vector<Proposal>> proposals,
                             std::size_t n) {
  double sum = 0.0;
  for (double t : default_iou_grid()) sum += recall_at(gt_all, proposals, n, t);
  return sum / static_cast<double>(kArThresholdCount);
}

// ---------------------------------------------------------------------------
// Size bins: relative area, left-closed at 1%, 2%, 5%, 10%.

enum class SizeBin { XS, S, M, L, XL };

inline constexpr std::array<SizeBin, 5> kAllSizeBins = {SizeBin::XS, SizeBin::S, SizeBin::M, SizeBin::L, SizeBin::XL};

inline std::string_view size_bin_name(SizeBin b) {
  switch (b) {
    case SizeBin::XS: return "XS";
    case SizeBin::S: return "S";
    case SizeBin::M: return "M";
    case SizeBin::L: return "L";
    case SizeBin::XL: return "XL";
  }
  return "?";
}

inline SizeBin parse_size_bin(std::string_view name) {
  for (SizeBin b : kAllSizeBins)
    if (size_bin_name(b) == name) return b;
  throw FormatError("unknown size bin '" + std::string(name) + "'");
}

inline SizeBin size_bin_of(const BinaryMask& instance) {
  if (instance.empty()) throw ValidationError("size bin of an empty instance is undefined");
  // Integer comparisons so the bin edges are exact.
  const std::int64_t a100 = instance.area() * 100;
  const std::int64_t total = instance.geometry().pixel_count();
  if (a100 < 1 * total) return SizeBin::XS;
  if (a100 < 2 * total) return SizeBin::S;
  if (a100 < 5 * total) return SizeBin::M;
  if (a100 < 10 * total) return SizeBin::L;
  return SizeBin::XL;
}

using RecallCurve = std::vector<std::pair<double, double>>;  // (IoU threshold, recall)

namespace detail {

inline void require_grid(std::span<const double> grid) {
  if (grid.empty()) throw ValidationError("IoU grid must be nonempty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] <= 1.0)) throw ValidationError("IoU grid values must lie in (0, 1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ValidationError("IoU grid must be strictly ascending");
  }
}

}  // namespace detail

// Recall per size bin over the IoU grid. Bins without gt instances are absent.
inline std::map<SizeBin, RecallCurve> recall_curves_by_size(std::span<const FrameAnnotation> gt_all,
                                                            std::span<const std::vector<Proposal>> proposals,
                                                            std::size_t n, std::span<const double> iou_grid) {
  detail::require_parallel(gt_all, proposals);
  detail::require_budget(n);
  detail::require_grid(iou_grid);
  std::map<SizeBin, std::vector<std::size_t>> found;
  std::map<SizeBin, std::size_t> total;
  for (std::size_t f = 0; f < gt_all.size(); ++f) {
    const auto& gt = gt_all[f].instances;
    const IouTable t = iou_table(gt, proposals[f], n);
    for (std::size_t k = 0; k < iou_grid.size(); ++k) {
      const auto hits = greedy_hits(t, n, iou_grid[k]);
      for (std::size_t g = 0; g < gt.size(); ++g) {
        auto& row = found[size_bin_of(gt[g])];
        row.resize(iou_grid.size(), 0);
        row[k] += hits[g] ? 1 : 0;
      }
    }
    for (const BinaryMask& m : gt) ++total[size_bin_of(m)];
  }
  std::map<SizeBin, RecallCurve> curves;
  for (const auto& [bin, count] : total) {
    RecallCurve c;
    for (std::size_t k = 0; k < iou_grid.size(); ++k)
      c.emplace_back(iou_grid[k], static_cast<double>(found[bin][k]) / static_cast<double>(count));
    curves[bin] = std::move(c);
  }
  return curves;
}

// ---------------------------------------------------------------------------
// Quantiles: linear interpolation between order statistics at h = (n-1)p.

inline double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw ValidationError("quantile of an empty list is undefined");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile level must lie in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

inline double quantile_05(std::span<const double> values) { return quantile(values, 0.05); }

// ---------------------------------------------------------------------------
// Frame evaluation and stage aggregation

struct EvalConfig {
  bool mi_dsc = true;
  bool mi_nsd = true;
  std::optional<double> nsd_tolerance;  // mandatory when mi_nsd is requested
  bool ar = true;
  std::vector<std::size_t> ar_budgets{1, 10, 100};
  std::vector<double> iou_grid = default_iou_grid();
  std::size_t recall_budget = 100;
  Matcher matcher = Matcher::Optimal;
};

inline void validate(const EvalConfig& c) {
  if (c.mi_nsd) {
    if (!c.nsd_tolerance)
      throw ValidationError("MI_NSD requested but no NSD tolerance given (set --nsd-tolerance or eval.nsd_tolerance)");
    if (!(*c.nsd_tolerance >= 0.0)) throw ValidationError("NSD tolerance must be nonnegative");
  }
  if (c.ar) {
    if (c.ar_budgets.empty()) throw ValidationError("ar_budgets must be nonempty");
    for (std::size_t b : c.ar_budgets) detail::require_budget(b);
    detail::require_budget(c.recall_budget);
    detail::require_grid(c.iou_grid);
  }
}

struct FrameEvaluation {
  std::string frame_id;
  Stage stage = Stage::TestStage1;
  std::size_t gt_count = 0;
  std::optional<double> mi_dsc;
  std::optional<double> mi_nsd;
  // ar_hits[b][t]: gt instances recovered at ar_budgets[b] and the t-th AR threshold.
  std::vector<std::array<std::size_t, kArThresholdCount>> ar_hits;
  std::vector<SizeBin> gt_bins;
  // curve_hits[g][k]: gt g recovered at recall_budget and iou_grid[k].
  std::vector<std::vector<char>> curve_hits;
};

// `predictions` feed the MI metrics; `ranked` feeds recall (top-N by order).
inline FrameEvaluation evaluate_frame(const FrameAnnotation& frame, std::span<const Proposal> predictions,
                                      std::span<const Proposal> ranked, const EvalConfig& config) {
  FrameEvaluation ev;
  ev.frame_id = frame.id;
  ev.stage = frame.stage;
  ev.gt_count = frame.instances.size();

  std::vector<BinaryMask> pred_masks;
  pred_masks.reserve(predictions.size());
  for (const Proposal& p : predictions) pred_masks.push_back(p.mask);
  if (config.mi_dsc) ev.mi_dsc = mi_score_frame(frame.instances, pred_masks, MatchKernel::dice(), config.matcher);
  if (config.mi_nsd)
    ev.mi_nsd = mi_score_frame(frame.instances, pred_masks, MatchKernel::surface_dice(config.nsd_tolerance.value()),
                               config.matcher);

  if (config.ar) {
    std::size_t limit = config.recall_budget;
    for (std::size_t b : config.ar_budgets) limit = std::max(limit, b);
    const IouTable table = iou_table(frame.instances, ranked, limit);
    const auto thresholds = default_iou_grid();
    for (std::size_t b : config.ar_budgets) {
      std::array<std::size_t, kArThresholdCount> row{};
      for (std::size_t t = 0; t < kArThresholdCount; ++t) {
        for (char h : greedy_hits(table, b, thresholds[t])) row[t] += h ? 1 : 0;
      }
      ev.ar_hits.push_back(row);
    }
    for (const BinaryMask& g : frame.instances) ev.gt_bins.push_back(size_bin_of(g));
    ev.curve_hits.assign(ev.gt_count, std::vector<char>(config.iou_grid.size(), 0));
    for (std::size_t k = 0; k < config.iou_grid.size(); ++k) {
      const auto hits = greedy_hits(table, config.recall_budget, config.iou_grid[k]);
      for (std::size_t g = 0; g < ev.gt_count; ++g) ev.curve_hits[g][k] = hits[g];
    }
  }
  return ev;
}

struct StageReport {
  Stage stage = Stage::TestStage1;
  std::size_t frame_count = 0;
  std::size_t gt_count = 0;
  std::optional<double> q05_mi_dsc, mean_mi_dsc;
  std::optional<double> q05_mi_nsd, mean_mi_nsd;
  std::vector<std::pair<std::size_t, double>> average_recall;  // (budget, AR), budgets in config order
  std::map<SizeBin, RecallCurve> recall_curves;

  friend bool operator==(const StageReport&, const StageReport&) = default;
};

struct FrameScore {
  std::string frame_id;
  Stage stage = Stage::TestStage1;
  std::optional<double> mi_dsc;
  std::optional<double> mi_nsd;

  friend bool operator==(const FrameScore&, const FrameScore&) = default;
};

struct MetricReport {
  std::vector<FrameScore> per_frame;
  std::vector<StageReport> per_stage;  // ordered train, val, stage1..3; only stages with frames

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

namespace detail {

// Fixed-order sum so results do not depend on how frames were scheduled.
inline double ordered_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

inline StageReport aggregate_stage(std::span<const FrameEvaluation> frames, Stage stage, const EvalConfig& config) {
  StageReport r;
  r.stage = stage;
  std::vector<double> dsc_values, nsd_values;
  std::vector<std::array<std::size_t, kArThresholdCount>> ar_found(config.ar ? config.ar_budgets.size() : 0,
                                                                   std::array<std::size_t, kArThresholdCount>{});
  std::map<SizeBin, std::vector<std::size_t>> curve_found;
  std::map<SizeBin, std::size_t> bin_total;
  for (const FrameEvaluation& f : frames) {
    if (f.stage != stage) continue;
    ++r.frame_count;
    r.gt_count += f.gt_count;
    if (f.mi_dsc) dsc_values.push_back(*f.mi_dsc);
    if (f.mi_nsd) nsd_values.push_back(*f.mi_nsd);
    if (!config.ar) continue;
    for (std::size_t b = 0; b < ar_found.size(); ++b)
      for (std::size_t t = 0; t < kArThresholdCount; ++t) ar_found[b][t] += f.ar_hits[b][t];
    for (std::size_t g = 0; g < f.gt_count; ++g) {
      auto& row = curve_found[f.gt_bins[g]];
      row.resize(config.iou_grid.size(), 0);
      for (std::size_t k = 0; k < config.iou_grid.size(); ++k) row[k] += f.curve_hits[g][k] ? 1 : 0;
      ++bin_total[f.gt_bins[g]];
    }
  }
  if (r.frame_count == 0) throw ValidationError("stage " + std::string(stage_name(stage)) + " has no frames");

  if (!dsc_values.empty()) {
    r.q05_mi_dsc = quantile_05(dsc_values);
    r.mean_mi_dsc = detail::ordered_mean(dsc_values);
  }
  if (!nsd_values.empty()) {
    r.q05_mi_nsd = quantile_05(nsd_values);
    r.mean_mi_nsd = detail::ordered_mean(nsd_values);
  }
  if (config.ar) {
    for (std::size_t b = 0; b < ar_found.size(); ++b) {
      double sum = 0.0;
      for (std::size_t t = 0; t < kArThresholdCount; ++t) {
        sum += r.gt_count == 0 ? 1.0
                               : static_cast<double>(ar_found[b][t]) / static_cast<double>(r.gt_count);
      }
      r.average_recall.emplace_back(config.ar_budgets[b], sum / static_cast<double>(kArThresholdCount));
    }
    for (const auto& [bin, count] : bin_total) {
      RecallCurve c;
      for (std::size_t k = 0; k < config.iou_grid.size(); ++k)
        c.emplace_back(config.iou_grid[k], static_cast<double>(curve_found[bin][k]) / static_cast<double>(count));
      r.recall_curves[bin] = std::move(c);
    }
  }
  return r;
}

// Frames are reported in input order; stages in canonical order.
inline MetricReport build_report(std::span<const FrameEvaluation> frames, const EvalConfig& config) {
  MetricReport report;
  for (const FrameEvaluation& f : frames) report.per_frame.push_back({f.frame_id, f.stage, f.mi_dsc, f.mi_nsd});
  for (Stage s : kAllStages) {
    const bool present = std::any_of(frames.begin(), frames.end(), [&](const FrameEvaluation& f) { return f.stage == s; });
    if (present) report.per_stage.push_back(aggregate_stage(frames, s, config));
  }
  return report;
}

}  // namespace propseg
