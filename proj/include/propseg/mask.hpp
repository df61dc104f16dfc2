#pragma once

// Run-length encoded binary masks and the overlap algebra built on them.
//
// A mask stores maximal runs of foreground pixels in row-major order. Runs may
// wrap across rows; anything that needs row structure (boundaries, rendering)
// splits them through for_each_row_segment().

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "propseg/error.hpp"

namespace propseg {

struct FrameGeometry {
  std::int64_t width = 1;
  std::int64_t height = 1;

  constexpr std::int64_t pixel_count() const { return width * height; }
  friend constexpr bool operator==(const FrameGeometry&, const FrameGeometry&) = default;
};

inline void validate(const FrameGeometry& g) {
  if (g.width < 1 || g.height < 1) {
    throw GeometryError("frame geometry must be at least 1x1, got " + std::to_string(g.width) + "x" +
                        std::to_string(g.height));
  }
}

inline std::string to_string(const FrameGeometry& g) {
  return std::to_string(g.width) + "x" + std::to_string(g.height);
}

struct Run {
  std::int64_t start = 0;
  std::int64_t length = 0;

  constexpr std::int64_t end() const { return start + length; }
  friend constexpr bool operator==(const Run&, const Run&) = default;
};

struct Pixel {
  std::int64_t row = 0;
  std::int64_t col = 0;

  friend constexpr auto operator<=>(const Pixel&, const Pixel&) = default;
};

// Inclusive pixel bounding box. Only meaningful for nonempty masks.
struct BoundingBox {
  std::int64_t row_min = 0, row_max = -1;
  std::int64_t col_min = 0, col_max = -1;

  constexpr bool empty() const { return row_max < row_min; }
};

class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(FrameGeometry geometry) : geometry_(geometry) { validate(geometry_); }

  // Validates ordering and bounds; adjacent runs are coalesced so the stored
  // form is always maximal.
  static BinaryMask from_runs(FrameGeometry geometry, std::vector<Run> runs) {
    BinaryMask m(geometry);
    const std::int64_t limit = geometry.pixel_count();
    std::int64_t prev_end = -1;
    for (const Run& r : runs) {
      if (r.length <= 0) throw FormatError("run with nonpositive length");
      if (r.start < 0 || r.end() > limit) {
        throw GeometryError("run [" + std::to_string(r.start) + ", " + std::to_string(r.end()) +
                            ") outside frame " + to_string(geometry));
      }
      if (r.start < prev_end) throw FormatError("runs must be sorted and non-overlapping");
      if (!m.runs_.empty() && r.start == prev_end) {
        m.runs_.back().length += r.length;
      } else {
        m.runs_.push_back(r);
      }
      m.area_ += r.length;
      prev_end = r.end();
    }
    return m;
  }

  const FrameGeometry& geometry() const { return geometry_; }
  std::span<const Run> runs() const { return runs_; }
  std::int64_t area() const { return area_; }
  bool empty() const { return runs_.empty(); }

  bool contains(std::int64_t offset) const {
    auto it = std::upper_bound(runs_.begin(), runs_.end(), offset,
                               [](std::int64_t v, const Run& r) { return v < r.start; });
    if (it == runs_.begin()) return false;
    --it;
    return offset < it->end();
  }
  bool contains(Pixel p) const {
    if (p.row < 0 || p.col < 0 || p.row >= geometry_.height || p.col >= geometry_.width) return false;
    return contains(p.row * geometry_.width + p.col);
  }

  // Calls fn(row, col_begin, col_end) for each maximal horizontal segment,
  // in row-major order.
  template <typename Fn>
  void for_each_row_segment(Fn&& fn) const {
    const std::int64_t w = geometry_.width;
    for (const Run& r : runs_) {
      std::int64_t pos = r.start;
      const std::int64_t end = r.end();
      while (pos < end) {
        const std::int64_t row = pos / w;
        const std::int64_t row_end = std::min(end, (row + 1) * w);
        fn(row, pos - row * w, row_end - row * w);
        pos = row_end;
      }
    }
  }

  BoundingBox bounding_box() const {
    BoundingBox box;
    if (runs_.empty()) return box;
    const std::int64_t w = geometry_.width;
    box.row_min = runs_.front().start / w;
    box.row_max = (runs_.back().end() - 1) / w;
    box.col_min = w;
    box.col_max = -1;
    for_each_row_segment([&](std::int64_t, std::int64_t c0, std::int64_t c1) {
      box.col_min = std::min(box.col_min, c0);
      box.col_max = std::max(box.col_max, c1 - 1);
    });
    return box;
  }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    return a.geometry_ == b.geometry_ && a.runs_ == b.runs_;
  }

 private:
  FrameGeometry geometry_{};
  std::vector<Run> runs_;
  std::int64_t area_ = 0;
};

// Appends pixel ranges in increasing order and coalesces touching ones.
class RunBuilder {
 public:
  explicit RunBuilder(FrameGeometry geometry) : geometry_(geometry) {}

  void append(std::int64_t start, std::int64_t length) {
    if (length <= 0) return;
    if (!runs_.empty() && runs_.back().end() == start) {
      runs_.back().length += length;
    } else {
      runs_.push_back({start, length});
    }
  }

  BinaryMask build() && { return BinaryMask::from_runs(geometry_, std::move(runs_)); }

 private:
  FrameGeometry geometry_;
  std::vector<Run> runs_;
};

inline void require_same_geometry(const BinaryMask& a, const BinaryMask& b) {
  if (!(a.geometry() == b.geometry())) {
    throw GeometryError("mask geometry mismatch: " + to_string(a.geometry()) + " vs " +
                        to_string(b.geometry()));
  }
}

// Dense grids are row-major, one byte per pixel, nonzero = foreground.
inline BinaryMask encode(std::span<const std::uint8_t> dense, FrameGeometry geometry) {
  validate(geometry);
  if (static_cast<std::int64_t>(dense.size()) != geometry.pixel_count()) {
    throw GeometryError("dense grid has " + std::to_string(dense.size()) + " pixels, geometry " +
                        to_string(geometry) + " needs " + std::to_string(geometry.pixel_count()));
  }
  RunBuilder builder(geometry);
  const std::int64_t n = geometry.pixel_count();
  std::int64_t i = 0;
  while (i < n) {
    if (!dense[i]) {
      ++i;
      continue;
    }
    std::int64_t j = i;
    while (j < n && dense[j]) ++j;
    builder.append(i, j - i);
    i = j;
  }
  return std::move(builder).build();
}

inline std::vector<std::uint8_t> decode(const BinaryMask& mask) {
  std::vector<std::uint8_t> dense(static_cast<std::size_t>(mask.geometry().pixel_count()), 0);
  for (const Run& r : mask.runs()) std::fill_n(dense.begin() + r.start, r.length, std::uint8_t{1});
  return dense;
}

inline std::int64_t area(const BinaryMask& mask) { return mask.area(); }

inline std::int64_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
  require_same_geometry(a, b);
  const auto ra = a.runs();
  const auto rb = b.runs();
  std::size_t i = 0, j = 0;
  std::int64_t total = 0;
  while (i < ra.size() && j < rb.size()) {
    const std::int64_t lo = std::max(ra[i].start, rb[j].start);
    const std::int64_t hi = std::min(ra[i].end(), rb[j].end());
    if (hi > lo) total += hi - lo;
    if (ra[i].end() < rb[j].end()) {
      ++i;
    } else {
      ++j;
    }
  }
  return total;
}

inline std::int64_t union_area(const BinaryMask& a, const BinaryMask& b) {
  return a.area() + b.area() - intersection_area(a, b);
}

inline bool overlaps(const BinaryMask& a, const BinaryMask& b) {
  require_same_geometry(a, b);
  const auto ra = a.runs();
  const auto rb = b.runs();
  std::size_t i = 0, j = 0;
  while (i < ra.size() && j < rb.size()) {
    if (std::min(ra[i].end(), rb[j].end()) > std::max(ra[i].start, rb[j].start)) return true;
    if (ra[i].end() < rb[j].end()) {
      ++i;
    } else {
      ++j;
    }
  }
  return false;
}

// Both empty counts as perfect agreement; exactly one empty as none.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  const std::int64_t inter = intersection_area(a, b);
  const std::int64_t uni = a.area() + b.area() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double dsc(const BinaryMask& a, const BinaryMask& b) {
  const std::int64_t inter = intersection_area(a, b);
  const std::int64_t sum = a.area() + b.area();
  if (sum == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(sum);
}

namespace detail {

template <typename Keep>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, Keep keep) {
  require_same_geometry(a, b);
  // Boundary sweep over the merged start/end events of both run lists.
  std::vector<std::pair<std::int64_t, int>> events;
  events.reserve(2 * (a.runs().size() + b.runs().size()));
  for (const Run& r : a.runs()) {
    events.emplace_back(r.start, 1);
    events.emplace_back(r.end(), -1);
  }
  for (const Run& r : b.runs()) {
    events.emplace_back(r.start, 2);
    events.emplace_back(r.end(), -2);
  }
  std::sort(events.begin(), events.end());
  RunBuilder builder(a.geometry());
  bool in_a = false, in_b = false;
  std::int64_t open = 0;
  bool inside = false;
  for (std::size_t k = 0; k < events.size();) {
    const std::int64_t pos = events[k].first;
    for (; k < events.size() && events[k].first == pos; ++k) {
      switch (events[k].second) {
        case 1: in_a = true; break;
        case -1: in_a = false; break;
        case 2: in_b = true; break;
        case -2: in_b = false; break;
      }
    }
    const bool now = keep(in_a, in_b);
    if (now && !inside) open = pos;
    if (!now && inside) builder.append(open, pos - open);
    inside = now;
  }
  return std::move(builder).build();
}

}  // namespace detail

inline BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  return detail::combine(a, b, [](bool x, bool y) { return x || y; });
}

inline BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b) {
  return detail::combine(a, b, [](bool x, bool y) { return x && y; });
}

inline BinaryMask mask_difference(const BinaryMask& a, const BinaryMask& b) {
  return detail::combine(a, b, [](bool x, bool y) { return x && !y; });
}

}  // namespace propseg
