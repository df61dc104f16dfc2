#pragma once

// Proposal post-processing: objectness filter, overlap grouping, pixel-vote
// fusion. Turns a dense stream of near-duplicate proposals into one mask per
// well-supported object.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "propseg/error.hpp"
#include "propseg/mask.hpp"

namespace propseg {

struct Proposal {
  BinaryMask mask;
  double score = 0.0;  // objectness in [0, 1]

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

struct MergeConfig {
  double score_threshold = 0.8;
  std::size_t min_group_size = 5;
  double vote_fraction = 0.10;
  // 0 means "any shared pixel" links two proposals; otherwise IoU >= this.
  double overlap_min_iou = 0.0;
};

inline void validate(const MergeConfig& c) {
  if (c.min_group_size < 1) throw ValidationError("min_group_size must be >= 1");
  if (!(c.vote_fraction > 0.0 && c.vote_fraction <= 1.0)) throw ValidationError("vote_fraction must lie in (0, 1]");
  if (!(c.overlap_min_iou >= 0.0 && c.overlap_min_iou < 1.0))
    throw ValidationError("overlap_min_iou must lie in [0, 1)");
}

struct ProposalGroup {
  std::vector<std::size_t> members;  // indices into the pipeline input, ascending
  BinaryMask merged;
  double merged_score = 0.0;
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

// Keeps proposals with score >= threshold, in input order.
inline std::vector<Proposal> filter_by_score(std::span<const Proposal> proposals, double threshold) {
  std::vector<Proposal> kept;
  for (const Proposal& p : proposals) {
    if (p.score >= threshold) kept.push_back(p);
  }
  return kept;
}

// Connected components of the overlap graph. Each group lists its member
// indices ascending; groups are ordered by their smallest member.
inline std::vector<std::vector<std::size_t>> build_overlap_groups(std::span<const Proposal> proposals,
                                                                  double overlap_min_iou) {
  const std::size_t n = proposals.size();
  for (std::size_t i = 1; i < n; ++i) require_same_geometry(proposals[0].mask, proposals[i].mask);

  std::vector<BoundingBox> boxes(n);
  for (std::size_t i = 0; i < n; ++i) boxes[i] = proposals[i].mask.bounding_box();
  auto boxes_touch = [&](std::size_t i, std::size_t j) {
    const BoundingBox& a = boxes[i];
    const BoundingBox& b = boxes[j];
    if (a.empty() || b.empty()) return false;
    return a.row_min <= b.row_max && b.row_min <= a.row_max && a.col_min <= b.col_max && b.col_min <= a.col_max;
  };

  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!boxes_touch(i, j)) continue;
      if (uf.find(i) == uf.find(j)) continue;
      const bool linked = overlap_min_iou <= 0.0 ? overlaps(proposals[i].mask, proposals[j].mask)
                                                 : iou(proposals[i].mask, proposals[j].mask) >= overlap_min_iou;
      if (linked) uf.unite(i, j);
    }
  }

  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = uf.find(i);
    if (slot[root] == n) {
      slot[root] = groups.size();
      groups.emplace_back();
    }
    groups[slot[root]].push_back(i);
  }
  return groups;
}

// Smallest pixel count c with c / members >= vote_fraction, evaluated with the
// same floating-point comparison the rule is stated in.
inline std::size_t minimum_votes(std::size_t members, double vote_fraction) {
  for (std::size_t c = 0; c <= members; ++c) {
    if (static_cast<double>(c) / static_cast<double>(members) >= vote_fraction) return c;
  }
  return members + 1;
}

// Pixels covered by at least vote_fraction of the member masks (inclusive).
inline BinaryMask merge_group(std::span<const BinaryMask> members, double vote_fraction) {
  if (members.empty()) throw ValidationError("merge_group needs at least one member");
  for (std::size_t i = 1; i < members.size(); ++i) require_same_geometry(members[0], members[i]);

  const std::size_t need = std::max<std::size_t>(1, minimum_votes(members.size(), vote_fraction));
  std::vector<std::pair<std::int64_t, int>> events;
  for (const BinaryMask& m : members) {
    for (const Run& r : m.runs()) {
      events.emplace_back(r.start, 1);
      events.emplace_back(r.end(), -1);
    }
  }
  std::sort(events.begin(), events.end());

  RunBuilder builder(members[0].geometry());
  std::int64_t depth = 0;
  std::int64_t open = 0;
  bool inside = false;
  for (std::size_t k = 0; k < events.size();) {
    const std::int64_t pos = events[k].first;
    for (; k < events.size() && events[k].first == pos; ++k) depth += events[k].second;
    const bool now = depth >= static_cast<std::int64_t>(need);
    if (now && !inside) open = pos;
    if (!now && inside) builder.append(open, pos - open);
    inside = now;
  }
  return std::move(builder).build();
}

inline BinaryMask merge_group(std::span<const Proposal> members, double vote_fraction) {
  std::vector<BinaryMask> masks;
  masks.reserve(members.size());
  for (const Proposal& p : members) masks.push_back(p.mask);
  return merge_group(std::span<const BinaryMask>(masks), vote_fraction);
}

inline double merged_score(std::span<const Proposal> members) {
  if (members.empty()) throw ValidationError("merged_score needs at least one member");
  double best = members[0].score;
  for (const Proposal& p : members) best = std::max(best, p.score);
  return best;
}

// Filter, group, drop small groups, fuse. Output is ordered by merged score
// (descending), then merged area (descending), then first member index.
inline std::vector<ProposalGroup> run_pipeline(std::span<const Proposal> proposals, const MergeConfig& config) {
  validate(config);
  for (std::size_t i = 1; i < proposals.size(); ++i) require_same_geometry(proposals[0].mask, proposals[i].mask);

  std::vector<std::size_t> kept_index;
  std::vector<Proposal> kept;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (proposals[i].score >= config.score_threshold) {
      kept_index.push_back(i);
      kept.push_back(proposals[i]);
    }
  }

  std::vector<ProposalGroup> out;
  for (const auto& group : build_overlap_groups(kept, config.overlap_min_iou)) {
    if (group.size() < config.min_group_size) continue;
    std::vector<Proposal> members;
    members.reserve(group.size());
    ProposalGroup g;
    for (std::size_t local : group) {
      members.push_back(kept[local]);
      g.members.push_back(kept_index[local]);
    }
    g.merged = merge_group(std::span<const Proposal>(members), config.vote_fraction);
    if (g.merged.empty()) continue;
    g.merged_score = merged_score(members);
    out.push_back(std::move(g));
  }

  std::sort(out.begin(), out.end(), [](const ProposalGroup& a, const ProposalGroup& b) {
    if (a.merged_score != b.merged_score) return a.merged_score > b.merged_score;
    if (a.merged.area() != b.merged.area()) return a.merged.area() > b.merged.area();
    return a.members.front() < b.members.front();
  });
  return out;
}

// Pipeline output as ranked proposals.
inline std::vector<Proposal> merged_proposals(std::span<const ProposalGroup> groups) {
  std::vector<Proposal> out;
  out.reserve(groups.size());
  for (const ProposalGroup& g : groups) out.push_back({g.merged, g.merged_score});
  return out;
}

}  // namespace propseg
