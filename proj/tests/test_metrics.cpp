#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "propseg/hungarian.hpp"
#include "propseg/metrics.hpp"
#include "test_support.hpp"

namespace propseg {
namespace {

using testing::Dense;
using testing::rect;

const FrameGeometry kG{32, 32};

FrameAnnotation frame_of(std::vector<BinaryMask> gt, Stage stage = Stage::TestStage1, std::string id = "f") {
  FrameAnnotation a;
  a.id = std::move(id);
  a.geometry = kG;
  a.instances = std::move(gt);
  a.stage = stage;
  return a;
}

std::vector<Proposal> as_proposals(const std::vector<BinaryMask>& ms, double score = 0.9) {
  std::vector<Proposal> out;
  for (const auto& m : ms) out.push_back({m, score});
  return out;
}

TEST(HungarianTest, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 400; ++i) {
    const std::size_t rows = rng() % 7, cols = rng() % 7;
    std::vector<double> s(rows * cols);
    for (double& x : s) x = u(rng) < 0.3 ? 0.0 : u(rng);
    const auto a = max_score_assignment(s, rows, cols);
    ASSERT_EQ(a.size(), rows);
    double total = 0.0;
    std::vector<char> used(cols, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      if (a[r] < 0) continue;
      ASSERT_LT(static_cast<std::size_t>(a[r]), cols);
      ASSERT_FALSE(used[static_cast<std::size_t>(a[r])]);
      used[static_cast<std::size_t>(a[r])] = 1;
      total += s[r * cols + static_cast<std::size_t>(a[r])];
    }
    ASSERT_NEAR(total, testing::brute_force_best_total(s, rows, cols), 1e-12);
  }
}

TEST(MatchTest, SinglePair) {
  const BinaryMask g = rect(kG, 0, 0, 4, 4), p = rect(kG, 1, 1, 4, 4);
  const std::vector<BinaryMask> gt{g}, pred{p};
  const auto r = match_instances(gt, pred, MatchKernel::dice());
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_DOUBLE_EQ(r.pairs[0].score, dsc(g, p));
  EXPECT_TRUE(r.unmatched_gt.empty());
  EXPECT_TRUE(r.unmatched_pred.empty());
}

TEST(MatchTest, CrosswiseBeatsGreedy) {
  // Greedy grabs the single best pair (0,0) and strands gt 1; the optimum
  // pairs crosswise.
  const std::vector<double> s{0.9, 0.8, 0.7, 0.0};
  const auto opt = match_from_scores(s, 2, 2, Matcher::Optimal);
  const auto greedy = match_from_scores(s, 2, 2, Matcher::Greedy);
  EXPECT_NEAR(opt.total_score(), 1.5, 1e-12);
  EXPECT_NEAR(opt.total_score(), testing::brute_force_best_total(s, 2, 2), 1e-12);
  EXPECT_NEAR(greedy.total_score(), 0.9, 1e-12);
  ASSERT_EQ(opt.pairs.size(), 2u);
  EXPECT_EQ(opt.pairs[0].pred, 1u);
  EXPECT_EQ(opt.pairs[1].pred, 0u);
}

TEST(MatchTest, CrosswiseOnMasks) {
  // pred 0 overlaps both gts; pred 1 overlaps only gt 0.
  const BinaryMask g0 = rect(kG, 0, 0, 4, 8), g1 = rect(kG, 4, 0, 4, 8);
  const BinaryMask p0 = rect(kG, 2, 0, 5, 8), p1 = rect(kG, 0, 0, 3, 8);
  const std::vector<BinaryMask> gt{g0, g1}, pred{p0, p1};
  const auto s = score_matrix(gt, pred, MatchKernel::dice());
  const auto r = match_instances(gt, pred, MatchKernel::dice());
  EXPECT_NEAR(r.total_score(), testing::brute_force_best_total(s, 2, 2), 1e-12);
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0].pred, 1u);
  EXPECT_EQ(r.pairs[1].pred, 0u);
}

TEST(MatchTest, EmptyInputs) {
  const auto r = match_instances({}, {}, MatchKernel::dice());
  EXPECT_TRUE(r.pairs.empty());
  EXPECT_TRUE(r.unmatched_gt.empty());
  EXPECT_TRUE(r.unmatched_pred.empty());
}

TEST(MatchTest, ZeroScorePairsAreUnmatched) {
  const std::vector<BinaryMask> gt{rect(kG, 0, 0, 2, 2)}, pred{rect(kG, 10, 10, 2, 2)};
  const auto r = match_instances(gt, pred, MatchKernel::dice());
  EXPECT_TRUE(r.pairs.empty());
  EXPECT_EQ(r.unmatched_gt.size(), 1u);
  EXPECT_EQ(r.unmatched_pred.size(), 1u);
}

TEST(MatchTest, ScoreMatrixSkipsFarBoxesOnlyWhenExact) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 30; ++i) {
    const auto gt = testing::random_disjoint_instances(rng, kG, 4);
    const auto pred = testing::random_disjoint_instances(rng, kG, 4);
    for (const MatchKernel k : {MatchKernel::dice(), MatchKernel::surface_dice(3.0), MatchKernel::intersection_over_union()}) {
      const auto s = score_matrix(gt, pred, k);
      for (std::size_t a = 0; a < gt.size(); ++a)
        for (std::size_t b = 0; b < pred.size(); ++b) ASSERT_EQ(s[a * pred.size() + b], k(gt[a], pred[b]));
    }
  }
}

TEST(MiScoreTest, Examples) {
  const BinaryMask a = rect(kG, 0, 0, 4, 4), b = rect(kG, 10, 10, 3, 5);
  const std::vector<BinaryMask> gt{a, b};
  EXPECT_DOUBLE_EQ(mi_score_frame(gt, gt, MatchKernel::dice()), 1.0);
  EXPECT_DOUBLE_EQ(mi_score_frame(gt, std::vector<BinaryMask>{a}, MatchKernel::dice()), 0.5);
  EXPECT_DOUBLE_EQ(mi_score_frame(gt, {}, MatchKernel::dice()), 0.0);
  EXPECT_DOUBLE_EQ(mi_score_frame({}, {}, MatchKernel::dice()), 1.0);
  EXPECT_DOUBLE_EQ(mi_score_frame({}, gt, MatchKernel::dice()), 0.0);
  // Extra false positives are penalised through the denominator.
  EXPECT_DOUBLE_EQ(mi_score_frame(std::vector<BinaryMask>{a}, gt, MatchKernel::surface_dice(1.0)), 0.5);
}

TEST(OracleTest, PicksExactCopies) {
  const BinaryMask a = rect(kG, 0, 0, 4, 4), b = rect(kG, 10, 10, 3, 5);
  const std::vector<BinaryMask> gt{a, b};
  const std::vector<Proposal> ps{{rect(kG, 0, 0, 4, 3), 0.99}, {b, 0.1}, {a, 0.2}, {rect(kG, 20, 20, 2, 2), 0.95}};
  const auto sel = oracle_select(gt, ps);
  ASSERT_EQ(sel.size(), 2u);
  EXPECT_EQ(sel[0].proposal_index, 2u);
  EXPECT_EQ(sel[1].proposal_index, 1u);
  EXPECT_EQ(sel[0].iou, 1.0);
}

TEST(OracleTest, TiesPreferHigherScoreThenLowerIndex) {
  const BinaryMask a = rect(kG, 0, 0, 4, 4);
  const std::vector<BinaryMask> gt{a};
  EXPECT_EQ(oracle_select(gt, std::vector<Proposal>{{a, 0.3}, {a, 0.7}, {a, 0.7}})[0].proposal_index, 1u);
}

TEST(OracleTest, UntouchedGtStaysUnpaired) {
  const std::vector<BinaryMask> gt{rect(kG, 0, 0, 4, 4), rect(kG, 20, 20, 4, 4)};
  EXPECT_TRUE(oracle_select(gt, {}).empty());
  const auto sel = oracle_select(gt, std::vector<Proposal>{{rect(kG, 21, 21, 2, 2), 0.5}});
  ASSERT_EQ(sel.size(), 1u);
  EXPECT_EQ(sel[0].gt_index, 1u);
}

TEST(RecallTest, GridHasTenExactSteps) {
  const auto grid = default_iou_grid();
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_EQ(grid.front(), 0.5);
  EXPECT_EQ(grid.back(), 0.95);
  EXPECT_EQ(grid[3], 0.65);
}

TEST(RecallTest, ExactCopiesAndPigeonhole) {
  const std::vector<BinaryMask> gt{rect(kG, 0, 0, 4, 4), rect(kG, 20, 20, 4, 4)};
  const std::vector<FrameAnnotation> frames{frame_of(gt)};
  const std::vector<std::vector<Proposal>> ps{as_proposals(gt)};
  EXPECT_EQ(recall_at(frames, ps, 2, 0.95), 1.0);
  EXPECT_EQ(average_recall(frames, ps, 100), 1.0);
  EXPECT_LE(recall_at(frames, ps, 1, 0.5), 0.5);
  EXPECT_THROW(recall_at(frames, ps, 0, 0.5), ValidationError);
  EXPECT_THROW(recall_at(frames, ps, 1, 0.0), ValidationError);
}

TEST(RecallTest, NoGtMeansFullRecall) {
  const std::vector<FrameAnnotation> frames{frame_of({})};
  const std::vector<std::vector<Proposal>> ps{as_proposals({rect(kG, 0, 0, 2, 2)})};
  EXPECT_EQ(recall_at(frames, ps, 10, 0.5), 1.0);
}

TEST(RecallTest, GreedyEqualsMaximumMatchingAboveHalf) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 200; ++i) {
    const auto gt = testing::random_disjoint_instances(rng, {16, 16}, 1 + rng() % 4);
    std::vector<Proposal> ps;
    const std::size_t n = 1 + rng() % 6;
    for (std::size_t k = 0; k < n; ++k) {
      // perturb a gt copy or draw a fresh blob
      if (!gt.empty() && rng() % 2 == 0) {
        Dense d = decode(gt[rng() % gt.size()]);
        for (auto& px : d)
          if (rng() % 10 == 0) px = 1 - px;
        ps.push_back({encode(d, {16, 16}), 0.5});
      } else {
        ps.push_back({testing::random_mask(rng, {16, 16}, 1, 0.0), 0.5});
      }
    }
    const std::size_t budget = 1 + rng() % n;
    const std::vector<FrameAnnotation> frames{[&] {
      FrameAnnotation a;
      a.geometry = {16, 16};
      a.instances = gt;
      return a;
    }()};
    const std::vector<std::vector<Proposal>> pl{ps};
    for (double thr : {0.55, 0.7, 0.9}) {
      std::vector<std::vector<char>> adj(gt.size(), std::vector<char>(budget, 0));
      for (std::size_t g = 0; g < gt.size(); ++g)
        for (std::size_t p = 0; p < budget; ++p) {
          const Dense dg = decode(gt[g]), dp = decode(ps[p].mask);
          const auto inter = testing::dense_intersection(dg, dp), uni = testing::dense_union(dg, dp);
          adj[g][p] = static_cast<double>(inter) / static_cast<double>(uni) >= thr ? 1 : 0;
        }
      const double want = gt.empty() ? 1.0
                                     : static_cast<double>(testing::brute_force_max_matching(adj, budget)) /
                                           static_cast<double>(gt.size());
      ASSERT_DOUBLE_EQ(recall_at(frames, pl, budget, thr), want);
    }
  }
}

TEST(RecallTest, AverageIsMeanOfTenAndMonotoneInBudget) {
  std::mt19937_64 rng(41);
  std::vector<FrameAnnotation> frames;
  std::vector<std::vector<Proposal>> ps;
  for (int f = 0; f < 10; ++f) {
    frames.push_back(frame_of(testing::random_disjoint_instances(rng, kG, 3)));
    std::vector<Proposal> list;
    for (int k = 0; k < 30; ++k) list.push_back({testing::random_mask(rng, kG, 1, 0.0), 0.5});
    for (const auto& g : frames.back().instances) list.insert(list.begin() + static_cast<long>(rng() % 20), Proposal{g, 0.5});
    ps.push_back(list);
  }
  double prev = -1.0;
  for (std::size_t n : {1, 10, 100}) {
    double sum = 0.0;
    for (int k = 0; k < 10; ++k) sum += recall_at(frames, ps, n, (50.0 + 5.0 * k) / 100.0);
    const double ar = average_recall(frames, ps, n);
    EXPECT_NEAR(ar, sum / 10.0, 1e-12);
    EXPECT_GE(ar, prev);
    prev = ar;
  }
}

TEST(SizeBinTest, LeftClosedEdges) {
  const FrameGeometry g{100, 100};
  EXPECT_EQ(size_bin_of(BinaryMask::from_runs(g, {{0, 1}})), SizeBin::XS);
  EXPECT_EQ(size_bin_of(BinaryMask::from_runs(g, {{0, 99}})), SizeBin::XS);
  EXPECT_EQ(size_bin_of(BinaryMask::from_runs(g, {{0, 100}})), SizeBin::S);
  EXPECT_EQ(size_bin_of(BinaryMask::from_runs(g, {{0, 150}})), SizeBin::S);
  EXPECT_EQ(size_bin_of(BinaryMask::from_runs(g, {{0, 200}})), SizeBin::M);
  EXPECT_EQ(size_bin_of(BinaryMask::from_runs(g, {{0, 499}})), SizeBin::M);
  EXPECT_EQ(size_bin_of(BinaryMask::from_runs(g, {{0, 500}})), SizeBin::L);
  EXPECT_EQ(size_bin_of(BinaryMask::from_runs(g, {{0, 1000}})), SizeBin::XL);
  EXPECT_THROW(size_bin_of(BinaryMask(g)), ValidationError);
  for (SizeBin b : kAllSizeBins) EXPECT_EQ(parse_size_bin(size_bin_name(b)), b);
}

TEST(SizeBinTest, CurvesForExactCopiesAreFlatAndEmptyBinsAbsent) {
  const std::vector<BinaryMask> gt{rect(kG, 0, 0, 1, 12), rect(kG, 10, 10, 10, 12)};  // 1.2% and 11.7%
  const std::vector<FrameAnnotation> frames{frame_of(gt)};
  const std::vector<std::vector<Proposal>> ps{as_proposals(gt)};
  const auto grid = default_iou_grid();
  const auto curves = recall_curves_by_size(frames, ps, 100, grid);
  ASSERT_EQ(curves.size(), 2u);
  EXPECT_TRUE(curves.count(SizeBin::S));
  EXPECT_TRUE(curves.count(SizeBin::XL));
  EXPECT_FALSE(curves.count(SizeBin::M));
  for (const auto& [bin, curve] : curves) {
    ASSERT_EQ(curve.size(), grid.size());
    for (const auto& [t, r] : curve) EXPECT_EQ(r, 1.0);
  }
}

TEST(QuantileTest, Examples) {
  const std::vector<double> c(7, 0.3);
  EXPECT_EQ(quantile_05(c), 0.3);
  EXPECT_DOUBLE_EQ(quantile_05(std::vector<double>{0.0, 1.0}), 0.05);
  EXPECT_DOUBLE_EQ(quantile(std::vector<double>{3.0, 1.0, 2.0}, 0.5), 2.0);
  EXPECT_EQ(quantile(std::vector<double>{4.0}, 0.05), 4.0);
  EXPECT_THROW(quantile_05(std::vector<double>{}), ValidationError);
  EXPECT_THROW(quantile(std::vector<double>{1.0}, 1.5), ValidationError);
}

TEST(QuantileTest, MatchesOrderStatisticFormula) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(1 + rng() % 50);
    for (double& x : v) x = u(rng);
    std::vector<double> s = v;
    std::sort(s.begin(), s.end());
    const double p = u(rng);
    const double h = (static_cast<double>(s.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(h);
    const double want = lo + 1 < s.size() ? s[lo] + (h - static_cast<double>(lo)) * (s[lo + 1] - s[lo]) : s.back();
    ASSERT_DOUBLE_EQ(quantile(v, p), want);
    ASSERT_GE(quantile(v, p), s.front());
    ASSERT_LE(quantile(v, p), s.back());
  }
}

TEST(EvalConfigTest, NsdNeedsTolerance) {
  EvalConfig c;
  EXPECT_THROW(validate(c), ValidationError);
  c.nsd_tolerance = 2.0;
  EXPECT_NO_THROW(validate(c));
  c.mi_nsd = false;
  c.nsd_tolerance.reset();
  EXPECT_NO_THROW(validate(c));
  c.ar_budgets = {0};
  EXPECT_THROW(validate(c), ValidationError);
}

TEST(AggregateTest, PerfectFrameGivesOnes) {
  const std::vector<BinaryMask> gt{rect(kG, 0, 0, 4, 4), rect(kG, 20, 20, 6, 4)};
  EvalConfig cfg;
  cfg.nsd_tolerance = 1.0;
  const auto ps = as_proposals(gt);
  const std::vector<FrameEvaluation> evs{evaluate_frame(frame_of(gt), ps, ps, cfg)};
  const MetricReport rep = build_report(evs, cfg);
  ASSERT_EQ(rep.per_stage.size(), 1u);
  const StageReport& s = rep.per_stage[0];
  EXPECT_EQ(s.stage, Stage::TestStage1);
  EXPECT_EQ(*s.q05_mi_dsc, 1.0);
  EXPECT_EQ(*s.q05_mi_nsd, 1.0);
  EXPECT_EQ(*s.mean_mi_dsc, 1.0);
  ASSERT_EQ(s.average_recall.size(), 3u);
  EXPECT_EQ(s.average_recall[0].first, 1u);
  EXPECT_EQ(s.average_recall[0].second, 0.5);
  EXPECT_EQ(s.average_recall[1].second, 1.0);
  EXPECT_EQ(s.average_recall[2].second, 1.0);
}

TEST(AggregateTest, StageAggregatesMatchDirectRecall) {
  std::mt19937_64 rng(77);
  EvalConfig cfg;
  cfg.mi_nsd = false;
  std::vector<FrameAnnotation> frames;
  std::vector<std::vector<Proposal>> ps;
  std::vector<FrameEvaluation> evs;
  for (int f = 0; f < 12; ++f) {
    frames.push_back(frame_of(testing::random_disjoint_instances(rng, kG, 1 + rng() % 4),
                              f % 2 ? Stage::TestStage2 : Stage::TestStage1, "f" + std::to_string(f)));
    std::vector<Proposal> list;
    for (int k = 0; k < 15; ++k) list.push_back({testing::random_mask(rng, kG, 1, 0.0), 0.5});
    for (const auto& g : frames.back().instances) list.insert(list.begin() + static_cast<long>(rng() % 12), Proposal{g, 0.5});
    ps.push_back(list);
    evs.push_back(evaluate_frame(frames.back(), list, list, cfg));
  }
  const MetricReport rep = build_report(evs, cfg);
  ASSERT_EQ(rep.per_stage.size(), 2u);
  EXPECT_EQ(rep.per_frame.size(), 12u);
  for (const StageReport& s : rep.per_stage) {
    std::vector<FrameAnnotation> fs;
    std::vector<std::vector<Proposal>> pp;
    std::vector<double> dscs;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      if (frames[f].stage != s.stage) continue;
      fs.push_back(frames[f]);
      pp.push_back(ps[f]);
      dscs.push_back(*evs[f].mi_dsc);
    }
    EXPECT_EQ(s.frame_count, fs.size());
    EXPECT_DOUBLE_EQ(*s.q05_mi_dsc, quantile_05(dscs));
    EXPECT_FALSE(s.q05_mi_nsd.has_value());
    for (const auto& [budget, ar] : s.average_recall) EXPECT_NEAR(ar, average_recall(fs, pp, budget), 1e-12);
    const auto curves = recall_curves_by_size(fs, pp, cfg.recall_budget, cfg.iou_grid);
    EXPECT_EQ(s.recall_curves, curves);
  }
}

TEST(AggregateTest, EmptyStageIsAnError) {
  EvalConfig cfg;
  cfg.mi_nsd = false;
  EXPECT_THROW(aggregate_stage({}, Stage::TestStage3, cfg), ValidationError);
}

TEST(StageTest, NamesRoundTrip) {
  for (Stage s : kAllStages) EXPECT_EQ(parse_stage(stage_name(s)), s);
  EXPECT_THROW(parse_stage("stage4"), ValidationError);
}

TEST(AnnotationTest, OverlapIsRejected) {
  auto a = frame_of({rect(kG, 0, 0, 4, 4), rect(kG, 3, 3, 4, 4)});
  EXPECT_THROW(validate(a), ValidationError);
}

}  // namespace
}  // namespace propseg
