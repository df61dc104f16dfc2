#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "propseg/postproc.hpp"
#include "test_support.hpp"

namespace propseg {
namespace {

using testing::Dense;
using testing::rect;

const FrameGeometry kG{32, 32};

std::vector<Proposal> copies(const BinaryMask& m, std::size_t n, double score = 0.9) {
  return std::vector<Proposal>(n, Proposal{m, score});
}

// Groups via pairwise reachability (BFS over the dense adjacency matrix).
std::vector<std::vector<std::size_t>> brute_force_groups(const std::vector<Proposal>& ps) {
  const std::size_t n = ps.size();
  std::vector<int> label(n, -1);
  int next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const Dense di = decode(ps[i].mask);
      for (std::size_t j = 0; j < n; ++j) {
        if (label[j] >= 0) continue;
        if (testing::dense_intersection(di, decode(ps[j].mask)) > 0) {
          label[j] = next;
          stack.push_back(j);
        }
      }
    }
    ++next;
  }
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(next));
  for (std::size_t i = 0; i < n; ++i) out[static_cast<std::size_t>(label[i])].push_back(i);
  return out;
}

using RunList = std::vector<std::pair<std::int64_t, std::int64_t>>;

std::multiset<std::pair<double, RunList>> output_set(const std::vector<ProposalGroup>& gs) {
  std::multiset<std::pair<double, RunList>> s;
  for (const auto& g : gs) {
    RunList runs;
    for (const auto& r : g.merged.runs()) runs.emplace_back(r.start, r.length);
    s.insert({g.merged_score, runs});
  }
  return s;
}

TEST(FilterTest, ScoreExactlyAtThresholdSurvives) {
  const BinaryMask m = rect(kG, 0, 0, 2, 2);
  const std::vector<Proposal> ps{{m, 0.79}, {m, 0.80}, {m, 0.95}};
  const auto kept = filter_by_score(ps, 0.8);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].score, 0.80);
  EXPECT_EQ(kept[1].score, 0.95);
  EXPECT_TRUE(filter_by_score({}, 0.8).empty());
  EXPECT_EQ(filter_by_score(ps, 0.0), ps);
}

TEST(GroupingTest, DisjointMasksAreSingletons) {
  const std::vector<Proposal> ps{{rect(kG, 0, 0, 3, 3), 0.9}, {rect(kG, 10, 10, 3, 3), 0.9}, {rect(kG, 20, 0, 3, 3), 0.9}};
  const auto groups = build_overlap_groups(ps, 0.0);
  ASSERT_EQ(groups.size(), 3u);
  for (const auto& g : groups) EXPECT_EQ(g.size(), 1u);
}

TEST(GroupingTest, ChainIsTransitive) {
  const std::vector<Proposal> ps{{rect(kG, 0, 0, 4, 4), 0.9}, {rect(kG, 3, 3, 4, 4), 0.9}, {rect(kG, 6, 6, 4, 4), 0.9}};
  ASSERT_EQ(intersection_area(ps[0].mask, ps[2].mask), 0);
  const auto groups = build_overlap_groups(ps, 0.0);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0], (std::vector<std::size_t>{0, 1, 2}));
}

TEST(GroupingTest, JitteredCopiesAndTwoStrays) {
  std::vector<Proposal> ps;
  for (int k = 0; k < 7; ++k) ps.push_back({rect(kG, 8 + k % 3, 8 + k / 3, 6, 6), 0.9});
  ps.insert(ps.begin() + 3, Proposal{rect(kG, 0, 25, 3, 3), 0.9});
  ps.push_back({rect(kG, 28, 0, 2, 2), 0.9});
  std::vector<std::size_t> sizes;
  for (const auto& g : build_overlap_groups(ps, 0.0)) sizes.push_back(g.size());
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{1, 1, 7}));
}

TEST(GroupingTest, MatchesPairwiseReachability) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 60; ++i) {
    std::vector<Proposal> ps;
    const int n = 1 + static_cast<int>(rng() % 14);
    for (int k = 0; k < n; ++k) ps.push_back({testing::random_mask(rng, {24, 24}, 1, 0.0), 0.9});
    ASSERT_EQ(build_overlap_groups(ps, 0.0), brute_force_groups(ps));
  }
}

TEST(GroupingTest, IouFloorSplitsWeakLinks) {
  const std::vector<Proposal> ps{{rect(kG, 0, 0, 4, 4), 0.9}, {rect(kG, 3, 3, 4, 4), 0.9}};
  EXPECT_EQ(build_overlap_groups(ps, 0.0).size(), 1u);
  EXPECT_EQ(build_overlap_groups(ps, 0.5).size(), 2u);
}

TEST(VoteTest, MinimumVotes) {
  EXPECT_EQ(minimum_votes(10, 0.10), 1u);
  EXPECT_EQ(minimum_votes(5, 0.10), 1u);
  EXPECT_EQ(minimum_votes(11, 0.10), 2u);
  EXPECT_EQ(minimum_votes(20, 0.10), 2u);
  EXPECT_EQ(minimum_votes(4, 1.0), 4u);
}

TEST(VoteTest, PixelInExactlyTenPercentIsIncluded) {
  std::vector<BinaryMask> ms(10, rect(kG, 4, 4, 5, 5));
  ms[6] = mask_union(ms[6], BinaryMask::from_runs(kG, {{0, 1}}));  // (0,0) in 1 of 10
  const BinaryMask merged = merge_group(ms, 0.10);
  EXPECT_TRUE(merged.contains(Pixel{0, 0}));
  EXPECT_FALSE(merged.contains(Pixel{0, 1}));
  EXPECT_EQ(merged.area(), 26);
}

TEST(VoteTest, BelowFractionIsExcluded) {
  std::vector<BinaryMask> ms(11, rect(kG, 4, 4, 5, 5));
  ms[2] = mask_union(ms[2], BinaryMask::from_runs(kG, {{0, 1}}));  // 1 of 11 < 10%
  EXPECT_FALSE(merge_group(ms, 0.10).contains(Pixel{0, 0}));
}

TEST(VoteTest, UnanimityAndBruteForce) {
  const BinaryMask m = rect(kG, 2, 3, 7, 9);
  EXPECT_EQ(merge_group(std::vector<BinaryMask>(5, m), 0.10), m);
  EXPECT_THROW(merge_group(std::vector<BinaryMask>{}, 0.1), ValidationError);

  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng() % 15;
    const double frac = std::vector<double>{0.1, 0.25, 0.5, 1.0}[rng() % 4];
    std::vector<BinaryMask> ms;
    std::vector<Dense> ds;
    for (std::size_t k = 0; k < n; ++k) {
      ds.push_back(testing::random_dense(rng, {16, 16}, 2, 0.02));
      ms.push_back(encode(ds.back(), {16, 16}));
    }
    Dense want(256, 0);
    for (std::size_t p = 0; p < want.size(); ++p) {
      std::size_t c = 0;
      for (const auto& d : ds) c += d[p];
      want[p] = static_cast<double>(c) / static_cast<double>(n) >= frac && c > 0 ? 1 : 0;
    }
    ASSERT_EQ(decode(merge_group(ms, frac)), want);
  }
}

TEST(ScoreTest, MergedScoreIsMax) {
  const BinaryMask m = rect(kG, 0, 0, 1, 1);
  EXPECT_EQ(merged_score(std::vector<Proposal>{{m, 0.81}, {m, 0.93}}), 0.93);
  EXPECT_EQ(merged_score(std::vector<Proposal>{{m, 0.84}}), 0.84);
  EXPECT_THROW(merged_score(std::vector<Proposal>{}), ValidationError);
}

TEST(PipelineTest, FourCopiesAreDiscardedFiveSurvive) {
  const BinaryMask m = rect(kG, 5, 5, 6, 4);
  EXPECT_TRUE(run_pipeline(copies(m, 4), {}).empty());
  const auto out = run_pipeline(copies(m, 5), {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].merged, m);
  EXPECT_EQ(out[0].members, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(PipelineTest, LowScoresGiveEmptyOutput) { EXPECT_TRUE(run_pipeline(copies(rect(kG, 0, 0, 3, 3), 9, 0.79), {}).empty()); }

TEST(PipelineTest, FilterRunsBeforeGrouping) {
  // A low-score bridge must not link two clusters.
  auto ps = copies(rect(kG, 0, 0, 4, 4), 5, 0.9);
  const auto right = copies(rect(kG, 0, 10, 4, 4), 6, 0.85);
  ps.insert(ps.end(), right.begin(), right.end());
  ps.push_back({rect(kG, 1, 0, 2, 14), 0.5});
  const auto out = run_pipeline(ps, {});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].merged_score, 0.9);
  EXPECT_EQ(out[1].members.front(), 5u);
}

TEST(PipelineTest, OrderedByScoreThenArea) {
  auto ps = copies(rect(kG, 0, 0, 3, 3), 5, 0.9);
  const auto big = copies(rect(kG, 10, 10, 6, 6), 5, 0.9);
  const auto top = copies(rect(kG, 20, 0, 2, 2), 5, 0.95);
  ps.insert(ps.end(), big.begin(), big.end());
  ps.insert(ps.end(), top.begin(), top.end());
  const auto out = run_pipeline(ps, {});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].merged.area(), 4);
  EXPECT_EQ(out[1].merged.area(), 36);
  EXPECT_EQ(out[2].merged.area(), 9);
}

TEST(PipelineProperty, PermutationInvariantAndBounded) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> score(0.6, 1.0);
  for (int i = 0; i < 40; ++i) {
    std::vector<Proposal> ps;
    const int n = 5 + static_cast<int>(rng() % 30);
    for (int k = 0; k < n; ++k) ps.push_back({testing::random_mask(rng, {20, 20}, 1, 0.0), score(rng)});
    const MergeConfig cfg{0.8, 3, 0.2, 0.0};
    const auto base = run_pipeline(ps, cfg);
    ASSERT_LE(base.size(), static_cast<std::size_t>(n) / cfg.min_group_size);
    for (const auto& g : base) ASSERT_GE(g.members.size(), cfg.min_group_size);

    std::vector<Proposal> shuffled = ps;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ASSERT_EQ(output_set(run_pipeline(shuffled, cfg)), output_set(base));

    // A stricter threshold keeps a subset, so no more members end up merged.
    const auto stricter = run_pipeline(ps, {0.9, 3, 0.2, 0.0});
    std::size_t members_base = 0, members_strict = 0;
    for (const auto& g : base) members_base += g.members.size();
    for (const auto& g : stricter) members_strict += g.members.size();
    ASSERT_LE(members_strict, members_base);
  }
}

TEST(MergeConfigTest, RejectsBadValues) {
  EXPECT_THROW(validate(MergeConfig{0.8, 0, 0.1, 0.0}), ValidationError);
  EXPECT_THROW(validate(MergeConfig{0.8, 5, 0.0, 0.0}), ValidationError);
  EXPECT_THROW(validate(MergeConfig{0.8, 5, 0.1, 1.0}), ValidationError);
  EXPECT_NO_THROW(validate(MergeConfig{}));
}

}  // namespace
}  // namespace propseg
