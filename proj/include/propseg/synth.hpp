#pragma once

// Seeded synthetic frames: elongated instrument-like ground truth entering
// from the frame border, plus a ranked proposal stream made of jittered
// near-duplicate clusters and unrelated distractor blobs.
//
// Random source (scheme "mt64-v1"): std::mt19937_64 seeded with the config
// seed; uniform reals use the top 53 bits, integers use rejection sampling.
// Byte-identical output for a fixed seed and config on a given platform; the
// shape rasterizer uses sin/cos, whose last bit may vary between libm builds.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "propseg/error.hpp"
#include "propseg/mask.hpp"
#include "propseg/metrics.hpp"
#include "propseg/postproc.hpp"

namespace propseg {

inline constexpr const char* kRandomScheme = "mt64-v1";

class Random {
 public:
  explicit Random(std::uint64_t seed) : engine_(seed) {}

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t x = 0;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  // Triangular on [mean - spread, mean + spread].
  double triangular(double mean, double spread) { return mean + spread * (uniform() - uniform()); }

 private:
  std::mt19937_64 engine_;
};

struct IntRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  friend bool operator==(const IntRange&, const IntRange&) = default;
};

struct ScoreModel {
  double mean = 0.5;
  double spread = 0.1;

  friend bool operator==(const ScoreModel&, const ScoreModel&) = default;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  FrameGeometry geometry{256, 192};
  IntRange instruments_per_frame{3, 5};
  std::array<double, 5> size_bin_mix{0.25, 0.2, 0.25, 0.2, 0.1};  // XS, S, M, L, XL
  IntRange cluster_size{8, 15};
  std::int64_t jitter_shift = 2;  // max |dx|, |dy| in pixels
  std::int64_t jitter_morph = 1;  // max erosion/dilation steps
  IntRange distractors_per_frame{30, 45};
  std::int64_t min_proposals_per_frame = 50;  // topped up with distractors
  ScoreModel true_scores{0.88, 0.10};
  ScoreModel distractor_scores{0.40, 0.35};
  double miss_rate = 0.1;  // chance an instrument gets no proposal cluster
  std::int64_t min_gap = 8;  // pixels between instruments
  std::array<std::int64_t, 3> frames_per_stage{10, 10, 10};

  // Exact copies, no jitter, distractors always below the 0.8 filter.
  static SynthConfig zero_jitter() {
    SynthConfig c;
    c.cluster_size = {5, 5};
    c.jitter_shift = 0;
    c.jitter_morph = 0;
    c.distractors_per_frame = {5, 15};
    c.min_proposals_per_frame = 0;
    c.true_scores = {0.90, 0.08};
    c.distractor_scores = {0.40, 0.35};
    c.miss_rate = 0.0;
    c.min_gap = 2;
    return c;
  }

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

inline void validate(const SynthConfig& c) {
  validate(c.geometry);
  auto range_ok = [](const IntRange& r) { return r.lo >= 0 && r.lo <= r.hi; };
  if (!range_ok(c.instruments_per_frame)) throw ValidationError("synth: bad instruments_per_frame range");
  if (!range_ok(c.cluster_size) || c.cluster_size.lo < 1) throw ValidationError("synth: bad cluster_size range");
  if (!range_ok(c.distractors_per_frame)) throw ValidationError("synth: bad distractors_per_frame range");
  if (c.jitter_shift < 0 || c.jitter_morph < 0 || c.min_gap < 0) throw ValidationError("synth: negative jitter or gap");
  double mix = 0.0;
  for (double w : c.size_bin_mix) {
    if (w < 0.0) throw ValidationError("synth: negative size_bin_mix weight");
    mix += w;
  }
  if (!(mix > 0.0)) throw ValidationError("synth: size_bin_mix must have positive total weight");
  if (!(c.miss_rate >= 0.0 && c.miss_rate <= 1.0)) throw ValidationError("synth: miss_rate must lie in [0, 1]");
  for (auto n : c.frames_per_stage)
    if (n < 0) throw ValidationError("synth: negative frame count");
}

struct SynthFrame {
  FrameAnnotation annotation;
  std::vector<Proposal> proposals;  // score-descending
  std::vector<int> source;          // per proposal: gt index, or -1 for a distractor
};

struct SynthDataset {
  std::vector<SynthFrame> frames;
};

namespace synth_detail {

using Grid = std::vector<std::uint8_t>;

inline Grid shifted(const Grid& g, const FrameGeometry& geo, std::int64_t dx, std::int64_t dy) {
  Grid out(g.size(), 0);
  for (std::int64_t r = 0; r < geo.height; ++r) {
    const std::int64_t sr = r - dy;
    if (sr < 0 || sr >= geo.height) continue;
    for (std::int64_t c = 0; c < geo.width; ++c) {
      const std::int64_t sc = c - dx;
      if (sc < 0 || sc >= geo.width) continue;
      out[static_cast<std::size_t>(r * geo.width + c)] = g[static_cast<std::size_t>(sr * geo.width + sc)];
    }
  }
  return out;
}

// One 4-neighbourhood dilation (grow) or erosion step; outside is background.
inline Grid morph_step(const Grid& g, const FrameGeometry& geo, bool grow) {
  Grid out(g.size(), 0);
  auto at = [&](std::int64_t r, std::int64_t c) -> bool {
    if (r < 0 || c < 0 || r >= geo.height || c >= geo.width) return false;
    return g[static_cast<std::size_t>(r * geo.width + c)] != 0;
  };
  for (std::int64_t r = 0; r < geo.height; ++r) {
    for (std::int64_t c = 0; c < geo.width; ++c) {
      const bool self = at(r, c);
      const bool n4[4] = {at(r - 1, c), at(r + 1, c), at(r, c - 1), at(r, c + 1)};
      bool v = self;
      if (grow) {
        for (bool b : n4) v = v || b;
      } else {
        for (bool b : n4) v = v && b;
      }
      out[static_cast<std::size_t>(r * geo.width + c)] = v ? 1 : 0;
    }
  }
  return out;
}

inline void paint_capsule(Grid& g, const FrameGeometry& geo, double r0, double c0, double r1, double c1,
                          double radius) {
  const double dr = r1 - r0, dc = c1 - c0;
  const double len2 = dr * dr + dc * dc;
  const auto rmin = static_cast<std::int64_t>(std::floor(std::min(r0, r1) - radius));
  const auto rmax = static_cast<std::int64_t>(std::ceil(std::max(r0, r1) + radius));
  const auto cmin = static_cast<std::int64_t>(std::floor(std::min(c0, c1) - radius));
  const auto cmax = static_cast<std::int64_t>(std::ceil(std::max(c0, c1) + radius));
  for (std::int64_t r = std::max<std::int64_t>(0, rmin); r <= std::min(geo.height - 1, rmax); ++r) {
    for (std::int64_t c = std::max<std::int64_t>(0, cmin); c <= std::min(geo.width - 1, cmax); ++c) {
      double t = len2 > 0.0 ? ((r - r0) * dr + (c - c0) * dc) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double pr = r0 + t * dr - r, pc = c0 + t * dc - c;
      if (pr * pr + pc * pc <= radius * radius) g[static_cast<std::size_t>(r * geo.width + c)] = 1;
    }
  }
}

inline void paint_ellipse(Grid& g, const FrameGeometry& geo, double rc, double cc, double ra, double ca) {
  for (std::int64_t r = std::max<std::int64_t>(0, static_cast<std::int64_t>(rc - ra) - 1);
       r <= std::min(geo.height - 1, static_cast<std::int64_t>(rc + ra) + 1); ++r) {
    for (std::int64_t c = std::max<std::int64_t>(0, static_cast<std::int64_t>(cc - ca) - 1);
         c <= std::min(geo.width - 1, static_cast<std::int64_t>(cc + ca) + 1); ++c) {
      const double y = (r - rc) / ra, x = (c - cc) / ca;
      if (x * x + y * y <= 1.0) g[static_cast<std::size_t>(r * geo.width + c)] = 1;
    }
  }
}

// Relative-area window and tool radius used when aiming for a size bin.
struct BinShape {
  double area_lo, area_hi, radius_lo, radius_hi;
};

inline BinShape bin_shape(SizeBin b) {
  switch (b) {
    case SizeBin::XS: return {0.003, 0.0095, 1.5, 3.0};
    case SizeBin::S: return {0.0105, 0.0195, 2.5, 5.0};
    case SizeBin::M: return {0.0205, 0.049, 4.0, 7.0};
    case SizeBin::L: return {0.051, 0.098, 6.0, 10.0};
    case SizeBin::XL: return {0.102, 0.16, 9.0, 14.0};
  }
  return {0.01, 0.02, 2.0, 4.0};
}

inline SizeBin draw_bin(Random& rng, const std::array<double, 5>& mix) {
  double total = 0.0;
  for (double w : mix) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    if (u < mix[i]) return kAllSizeBins[i];
    u -= mix[i];
  }
  for (std::size_t i = mix.size(); i-- > 0;)
    if (mix[i] > 0.0) return kAllSizeBins[i];
  return SizeBin::M;
}

// A thick segment entering from a random border point, optionally with a
// short angled tip at its far end.
inline Grid draw_instrument(Random& rng, const FrameGeometry& geo, SizeBin bin) {
  const BinShape shape = bin_shape(bin);
  const double target = rng.uniform(shape.area_lo, shape.area_hi) * static_cast<double>(geo.pixel_count());
  double radius = rng.uniform(shape.radius_lo, shape.radius_hi);
  const double pi = std::numbers::pi;
  if (target < 4.0 * pi * radius * radius) radius = std::sqrt(target / (4.0 * pi));
  // Half the anchored cap falls outside the frame.
  const double length = std::max(1.0, (target - 0.5 * pi * radius * radius) / (2.0 * radius));

  const auto side = rng.uniform_int(0, 3);
  double r0 = 0, c0 = 0, inward = 0;
  const double h = static_cast<double>(geo.height - 1), w = static_cast<double>(geo.width - 1);
  switch (side) {
    case 0: r0 = 0; c0 = rng.uniform(0, w); inward = pi / 2; break;
    case 1: r0 = h; c0 = rng.uniform(0, w); inward = -pi / 2; break;
    case 2: r0 = rng.uniform(0, h); c0 = 0; inward = 0; break;
    default: r0 = rng.uniform(0, h); c0 = w; inward = pi; break;
  }
  const double angle = inward + rng.uniform(-pi / 3, pi / 3);
  const double r1 = r0 + length * std::sin(angle);
  const double c1 = c0 + length * std::cos(angle);

  Grid g(static_cast<std::size_t>(geo.pixel_count()), 0);
  paint_capsule(g, geo, r0, c0, r1, c1, radius);
  if (rng.uniform() < 0.5) {
    const double tip_angle = angle + (rng.uniform() < 0.5 ? -1.0 : 1.0) * pi / 6;
    const double tip_len = 0.25 * length;
    paint_capsule(g, geo, r1, c1, r1 + tip_len * std::sin(tip_angle), c1 + tip_len * std::cos(tip_angle),
                  std::max(1.0, 0.6 * radius));
  }
  return g;
}

inline double clamp_score(double s) { return std::clamp(s, 0.0, 1.0); }

inline SynthFrame generate_frame(Random& rng, const SynthConfig& cfg, std::string id, Stage stage) {
  const FrameGeometry& geo = cfg.geometry;
  constexpr int kFrameAttempts = 50;
  constexpr int kShapeAttempts = 200;

  std::vector<Grid> instruments;
  for (int attempt = 0;; ++attempt) {
    if (attempt == kFrameAttempts)
      throw ValidationError("synth: cannot pack instruments into " + to_string(geo) + " for frame " + id +
                            " (reduce instrument count, sizes or min_gap)");
    instruments.clear();
    const auto wanted = rng.uniform_int(cfg.instruments_per_frame.lo, cfg.instruments_per_frame.hi);
    Grid occupied(static_cast<std::size_t>(geo.pixel_count()), 0);
    bool ok = true;
    for (std::int64_t k = 0; k < wanted && ok; ++k) {
      const SizeBin bin = draw_bin(rng, cfg.size_bin_mix);
      ok = false;
      for (int s = 0; s < kShapeAttempts; ++s) {
        Grid shape = draw_instrument(rng, geo, bin);
        const BinaryMask m = encode(shape, geo);
        if (m.empty() || size_bin_of(m) != bin) continue;
        bool clash = false;
        for (std::size_t i = 0; i < shape.size() && !clash; ++i) clash = shape[i] && occupied[i];
        if (clash) continue;
        Grid halo = shape;
        for (std::int64_t step = 0; step < cfg.min_gap; ++step) halo = morph_step(halo, geo, true);
        for (std::size_t i = 0; i < halo.size(); ++i) occupied[i] |= halo[i];
        instruments.push_back(std::move(shape));
        ok = true;
        break;
      }
    }
    if (ok) break;
  }

  SynthFrame frame;
  frame.annotation.id = std::move(id);
  frame.annotation.geometry = geo;
  frame.annotation.stage = stage;
  for (const Grid& g : instruments) frame.annotation.instances.push_back(encode(g, geo));

  struct Raw {
    Proposal p;
    int source;
  };
  std::vector<Raw> raw;
  for (std::size_t i = 0; i < instruments.size(); ++i) {
    if (rng.uniform() < cfg.miss_rate) continue;
    const auto members = rng.uniform_int(cfg.cluster_size.lo, cfg.cluster_size.hi);
    for (std::int64_t k = 0; k < members; ++k) {
      const auto dx = rng.uniform_int(-cfg.jitter_shift, cfg.jitter_shift);
      const auto dy = rng.uniform_int(-cfg.jitter_shift, cfg.jitter_shift);
      const auto morph = rng.uniform_int(-cfg.jitter_morph, cfg.jitter_morph);
      Grid g = shifted(instruments[i], geo, dx, dy);
      Grid base = g;
      for (std::int64_t s = 0; s < std::abs(morph); ++s) g = morph_step(g, geo, morph > 0);
      BinaryMask m = encode(g, geo);
      if (m.empty()) m = encode(base, geo);
      if (m.empty()) m = frame.annotation.instances[i];
      raw.push_back({{std::move(m), clamp_score(rng.triangular(cfg.true_scores.mean, cfg.true_scores.spread))},
                     static_cast<int>(i)});
    }
  }
  std::int64_t distractors = rng.uniform_int(cfg.distractors_per_frame.lo, cfg.distractors_per_frame.hi);
  distractors = std::max(distractors, cfg.min_proposals_per_frame - static_cast<std::int64_t>(raw.size()));
  for (std::int64_t k = 0; k < distractors; ++k) {
    Grid g(static_cast<std::size_t>(geo.pixel_count()), 0);
    const double rc = rng.uniform(0, static_cast<double>(geo.height - 1));
    const double cc = rng.uniform(0, static_cast<double>(geo.width - 1));
    const double ra = rng.uniform(2.0, 12.0), ca = rng.uniform(2.0, 12.0);
    paint_ellipse(g, geo, rc, cc, ra, ca);
    BinaryMask m = encode(g, geo);
    if (m.empty()) {
      const auto r = static_cast<std::int64_t>(rc), c = static_cast<std::int64_t>(cc);
      m = BinaryMask::from_runs(geo, {{r * geo.width + c, 1}});
    }
    raw.push_back({{std::move(m), clamp_score(rng.triangular(cfg.distractor_scores.mean, cfg.distractor_scores.spread))},
                   -1});
  }

  std::stable_sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) { return a.p.score > b.p.score; });
  for (Raw& r : raw) {
    frame.proposals.push_back(std::move(r.p));
    frame.source.push_back(r.source);
  }
  return frame;
}

}  // namespace synth_detail

// Frames are generated stage by stage with ids "<stage>_<nnnn>".
inline SynthDataset generate_dataset(const SynthConfig& config) {
  validate(config);
  Random rng(config.seed);
  SynthDataset ds;
  const std::array<Stage, 3> stages = {Stage::TestStage1, Stage::TestStage2, Stage::TestStage3};
  for (std::size_t s = 0; s < stages.size(); ++s) {
    for (std::int64_t k = 0; k < config.frames_per_stage[s]; ++k) {
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "_%04lld", static_cast<long long>(k));
      ds.frames.push_back(
          synth_detail::generate_frame(rng, config, std::string(stage_name(stages[s])) + suffix, stages[s]));
    }
  }
  return ds;
}

// Each proposal, with probability swap_rate, trades its score with a
// uniformly drawn proposal. Masks and list order are untouched.
inline std::vector<Proposal> degrade_ranking(std::span<const Proposal> proposals, double swap_rate, std::uint64_t seed) {
  if (!(swap_rate >= 0.0 && swap_rate <= 1.0)) throw ValidationError("swap_rate must lie in [0, 1]");
  std::vector<Proposal> out(proposals.begin(), proposals.end());
  if (out.size() < 2) return out;
  Random rng(seed);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(rng.uniform() < swap_rate)) continue;
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(out.size()) - 1));
    std::swap(out[i].score, out[j].score);
  }
  return out;
}

}  // namespace propseg
