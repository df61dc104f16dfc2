#pragma once

// Qualitative overlays: found instances as translucent filled regions with a
// solid contour in the instance colour, missed ground truth as a bare red
// contour. Written as binary PPM.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "propseg/boundary.hpp"
#include "propseg/io.hpp"
#include "propseg/mask.hpp"
#include "propseg/metrics.hpp"

namespace propseg {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kOverlayBackground{40, 40, 40};
inline constexpr Rgb kMissedContour{255, 0, 0};

// Indexed by gt instance, cycling. Contains no pure red.
inline constexpr std::array<Rgb, 8> kInstancePalette = {{
    {0, 160, 255},
    {0, 200, 80},
    {255, 200, 0},
    {200, 0, 255},
    {0, 220, 220},
    {255, 120, 0},
    {120, 120, 255},
    {160, 255, 100},
}};

struct RgbImage {
  FrameGeometry geometry{};
  std::vector<Rgb> pixels;

  Rgb at(std::int64_t row, std::int64_t col) const {
    return pixels[static_cast<std::size_t>(row * geometry.width + col)];
  }
};

// gt i counts as found when some selected mask reaches found_iou with it; the
// best such mask (highest IoU, then lowest index) is drawn in gt i's colour.
inline RgbImage render_overlay_image(const FrameAnnotation& frame, std::span<const BinaryMask> selected,
                                     double found_iou = 0.5) {
  validate(frame.geometry);
  RgbImage img{frame.geometry, std::vector<Rgb>(static_cast<std::size_t>(frame.geometry.pixel_count()), kOverlayBackground)};
  auto put = [&](const Pixel& p, Rgb c) { img.pixels[static_cast<std::size_t>(p.row * frame.geometry.width + p.col)] = c; };

  std::vector<int> best(frame.instances.size(), -1);
  for (std::size_t i = 0; i < frame.instances.size(); ++i) {
    double best_iou = -1.0;
    for (std::size_t j = 0; j < selected.size(); ++j) {
      require_same_geometry(frame.instances[i], selected[j]);
      const double v = iou(frame.instances[i], selected[j]);
      if (v >= found_iou && v > best_iou) {
        best_iou = v;
        best[i] = static_cast<int>(j);
      }
    }
  }

  for (std::size_t i = 0; i < frame.instances.size(); ++i) {
    if (best[i] < 0) continue;
    const Rgb c = kInstancePalette[i % kInstancePalette.size()];
    const BinaryMask& m = selected[static_cast<std::size_t>(best[i])];
    m.for_each_row_segment([&](std::int64_t row, std::int64_t c0, std::int64_t c1) {
      for (std::int64_t col = c0; col < c1; ++col) {
        Rgb& px = img.pixels[static_cast<std::size_t>(row * frame.geometry.width + col)];
        px = {static_cast<std::uint8_t>((px.r + c.r) / 2), static_cast<std::uint8_t>((px.g + c.g) / 2),
              static_cast<std::uint8_t>((px.b + c.b) / 2)};
      }
    });
    for (const Pixel& p : boundary(m).pixels) put(p, c);
  }
  for (std::size_t i = 0; i < frame.instances.size(); ++i) {
    if (best[i] >= 0) continue;
    for (const Pixel& p : boundary(frame.instances[i]).pixels) put(p, kMissedContour);
  }
  return img;
}

inline std::string to_ppm(const RgbImage& img) {
  std::string out = "P6\n" + std::to_string(img.geometry.width) + " " + std::to_string(img.geometry.height) + "\n255\n";
  out.reserve(out.size() + 3 * img.pixels.size());
  for (const Rgb& p : img.pixels) {
    out.push_back(static_cast<char>(p.r));
    out.push_back(static_cast<char>(p.g));
    out.push_back(static_cast<char>(p.b));
  }
  return out;
}

inline void render_overlay(const FrameAnnotation& frame, std::span<const BinaryMask> selected,
                           const std::filesystem::path& path, double found_iou = 0.5) {
  write_file(path, to_ppm(render_overlay_image(frame, selected, found_iou)));
}

}  // namespace propseg
