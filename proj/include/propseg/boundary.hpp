#pragma once

// Contours, exact Euclidean distance transforms and the surface Dice kernel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "propseg/mask.hpp"

namespace propseg {

// Inner 4-connected contour: foreground pixels with at least one background
// 4-neighbour. Pixels outside the frame count as background.
struct BoundarySet {
  FrameGeometry geometry{};
  std::vector<Pixel> pixels;  // row-major order

  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }
  bool contains(Pixel p) const { return std::binary_search(pixels.begin(), pixels.end(), p); }

  BoundingBox bounding_box() const {
    BoundingBox box;
    if (pixels.empty()) return box;
    box.row_min = pixels.front().row;
    box.row_max = pixels.back().row;
    box.col_min = std::numeric_limits<std::int64_t>::max();
    box.col_max = std::numeric_limits<std::int64_t>::min();
    for (const Pixel& p : pixels) {
      box.col_min = std::min(box.col_min, p.col);
      box.col_max = std::max(box.col_max, p.col);
    }
    return box;
  }
};

inline BoundarySet boundary(const BinaryMask& mask) {
  BoundarySet out{mask.geometry(), {}};
  if (mask.empty()) return out;

  struct Segment {
    std::int64_t c0, c1;
  };
  const BoundingBox box = mask.bounding_box();
  const std::int64_t rows = box.row_max - box.row_min + 1;
  std::vector<std::vector<Segment>> by_row(static_cast<std::size_t>(rows));
  mask.for_each_row_segment([&](std::int64_t r, std::int64_t c0, std::int64_t c1) {
    by_row[static_cast<std::size_t>(r - box.row_min)].push_back({c0, c1});
  });

  static const std::vector<Segment> kNone;
  auto row_segments = [&](std::int64_t r) -> const std::vector<Segment>& {
    if (r < box.row_min || r > box.row_max) return kNone;
    return by_row[static_cast<std::size_t>(r - box.row_min)];
  };
  auto mark_covered = [](const std::vector<Segment>& neighbours, const Segment& s,
                         std::vector<std::uint8_t>& covered) {
    for (const Segment& n : neighbours) {
      if (n.c1 <= s.c0) continue;
      if (n.c0 >= s.c1) break;
      const std::int64_t lo = std::max(n.c0, s.c0);
      const std::int64_t hi = std::min(n.c1, s.c1);
      std::fill(covered.begin() + (lo - s.c0), covered.begin() + (hi - s.c0), std::uint8_t{1});
    }
  };

  std::vector<std::uint8_t> above, below;
  for (std::int64_t r = box.row_min; r <= box.row_max; ++r) {
    for (const Segment& s : row_segments(r)) {
      const auto len = static_cast<std::size_t>(s.c1 - s.c0);
      above.assign(len, 0);
      below.assign(len, 0);
      mark_covered(row_segments(r - 1), s, above);
      mark_covered(row_segments(r + 1), s, below);
      for (std::size_t k = 0; k < len; ++k) {
        const bool edge = k == 0 || k + 1 == len || !above[k] || !below[k];
        if (edge) out.pixels.push_back({r, s.c0 + static_cast<std::int64_t>(k)});
      }
    }
  }
  return out;
}

// Per-pixel Euclidean distance (pixel-centre to pixel-centre) to the nearest
// source pixel. An empty source yields a field of +inf with source_empty set.
struct DistanceField {
  FrameGeometry geometry{};
  std::vector<double> values;
  bool source_empty = false;

  double at(std::int64_t row, std::int64_t col) const {
    return values[static_cast<std::size_t>(row * geometry.width + col)];
  }
};

namespace detail {

inline constexpr std::int64_t kInfSq = std::numeric_limits<std::int64_t>::max() / 4;

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), exact for
// integer inputs. f and out are strided views of length n.
inline void squared_dt_1d(const std::int64_t* f, std::int64_t* out, std::int64_t n, std::int64_t stride,
                          std::vector<std::int64_t>& v, std::vector<double>& z) {
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n) + 1);
  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    const std::int64_t fq = f[q * stride];
    if (fq >= kInfSq) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
      continue;
    }
    double s = 0.0;
    while (true) {
      const std::int64_t p = v[static_cast<std::size_t>(k)];
      const double num = static_cast<double>((fq + q * q) - (f[p * stride] + p * p));
      s = num / static_cast<double>(2 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
  }
  if (k < 0) {
    for (std::int64_t q = 0; q < n; ++q) out[q * stride] = kInfSq;
    return;
  }
  k = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k) + 1] < static_cast<double>(q)) ++k;
    const std::int64_t p = v[static_cast<std::size_t>(k)];
    out[q * stride] = (q - p) * (q - p) + f[p * stride];
  }
}

// Squared distances inside a window; sources outside the window are ignored.
struct Window {
  std::int64_t row0 = 0, col0 = 0, rows = 0, cols = 0;

  std::int64_t index(Pixel p) const { return (p.row - row0) * cols + (p.col - col0); }
};

inline std::vector<std::int64_t> squared_edt(std::span<const Pixel> sources, const Window& win) {
  std::vector<std::int64_t> grid(static_cast<std::size_t>(win.rows * win.cols), kInfSq);
  for (const Pixel& p : sources) {
    if (p.row < win.row0 || p.col < win.col0 || p.row >= win.row0 + win.rows || p.col >= win.col0 + win.cols)
      continue;
    grid[static_cast<std::size_t>(win.index(p))] = 0;
  }
  std::vector<std::int64_t> tmp(grid.size());
  std::vector<std::int64_t> v;
  std::vector<double> z;
  for (std::int64_t c = 0; c < win.cols; ++c) squared_dt_1d(grid.data() + c, tmp.data() + c, win.rows, win.cols, v, z);
  for (std::int64_t r = 0; r < win.rows; ++r)
    squared_dt_1d(tmp.data() + r * win.cols, grid.data() + r * win.cols, win.cols, 1, v, z);
  return grid;
}

}  // namespace detail

inline DistanceField distance_transform(const BoundarySet& source) {
  validate(source.geometry);
  DistanceField field{source.geometry, {}, source.empty()};
  const auto n = static_cast<std::size_t>(source.geometry.pixel_count());
  if (source.empty()) {
    field.values.assign(n, std::numeric_limits<double>::infinity());
    return field;
  }
  const detail::Window win{0, 0, source.geometry.height, source.geometry.width};
  const auto sq = detail::squared_edt(source.pixels, win);
  field.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) field.values[i] = std::sqrt(static_cast<double>(sq[i]));
  return field;
}

// Fraction of both contours lying within `tolerance` pixels of the other
// contour. Both empty gives 1, exactly one empty gives 0.
inline double surface_dice(const BinaryMask& pred, const BinaryMask& gt, double tolerance) {
  require_same_geometry(pred, gt);
  if (!(tolerance >= 0.0)) throw ValidationError("surface dice tolerance must be nonnegative");
  if (pred.empty() && gt.empty()) return 1.0;
  if (pred.empty() || gt.empty()) return 0.0;

  const BoundarySet bp = boundary(pred);
  const BoundarySet bg = boundary(gt);
  const BoundingBox a = bp.bounding_box();
  const BoundingBox b = bg.bounding_box();
  detail::Window win;
  win.row0 = std::min(a.row_min, b.row_min);
  win.col0 = std::min(a.col_min, b.col_min);
  win.rows = std::max(a.row_max, b.row_max) - win.row0 + 1;
  win.cols = std::max(a.col_max, b.col_max) - win.col0 + 1;

  auto within = [&](const BoundarySet& from, const BoundarySet& to) {
    const auto sq = detail::squared_edt(to.pixels, win);
    std::int64_t hits = 0;
    for (const Pixel& p : from.pixels) {
      if (std::sqrt(static_cast<double>(sq[static_cast<std::size_t>(win.index(p))])) <= tolerance) ++hits;
    }
    return hits;
  };
  const std::int64_t hits = within(bp, bg) + within(bg, bp);
  return static_cast<double>(hits) / static_cast<double>(bp.size() + bg.size());
}

}  // namespace propseg
