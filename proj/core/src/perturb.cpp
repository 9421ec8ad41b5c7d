#include "warp/perturb.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "warp/rng.hpp"

namespace warp {
namespace {

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
}

}  // namespace

double compute_sigma(const Image& image) {
  std::array<std::uint64_t, 256> histogram{};
  for (std::uint8_t v : image.data()) ++histogram[v];
  const double n = static_cast<double>(image.size());
  if (n == 0) return 0.0;
  std::uint64_t sum = 0;
  for (int v = 0; v < 256; ++v) sum += histogram[v] * static_cast<std::uint64_t>(v);
  const double mean = static_cast<double>(sum) / n;
  double ss = 0.0;
  for (int v = 0; v < 256; ++v) {
    if (histogram[v] == 0) continue;
    const double d = v - mean;
    ss += static_cast<double>(histogram[v]) * d * d;
  }
  return std::sqrt(ss / n);
}

std::vector<double> overlay_field(const Image& image, const NoiseOverlayParams& params) {
  if (!(params.noise_level >= 0.0 && params.noise_level <= 1.0)) {
    throw std::invalid_argument("noise level must lie in [0,1]");
  }
  const double a = params.noise_level;
  const auto src = image.data();
  std::vector<double> out(src.size());
  if (a == 0.0) {
    std::copy(src.begin(), src.end(), out.begin());
    return out;
  }
  const double scale = a * compute_sigma(image);
  Rng rng(params.seed);
  for (std::size_t i = 0; i < src.size(); ++i) {
    out[i] = (1.0 - a) * src[i] + scale * rng.normal();
  }
  return out;
}

Image global_overlay(const Image& image, const NoiseOverlayParams& params) {
  const auto field = overlay_field(image, params);
  Image out(image.width(), image.height());
  auto dst = out.data();
  for (std::size_t i = 0; i < field.size(); ++i) dst[i] = quantize(field[i]);
  return out;
}

ImageRecord global_overlay(const ImageRecord& record, const NoiseOverlayParams& params) {
  ImageRecord out{record.image_id, global_overlay(record.pixels, params), record.annotations, record.source};
  return out;
}

void PatchSpec::validate() const {
  if (pixels.empty()) throw std::invalid_argument("patch raster is empty");
  if (!(brightness >= 0.0) || !std::isfinite(brightness)) {
    throw std::invalid_argument("patch brightness must be a finite non-negative number");
  }
  for (int y = 0; y < pixels.height(); ++y) {
    for (int x = 0; x < pixels.width(); ++x) {
      if (pixels.at(x, y, 3) == 255) return;
    }
  }
  throw std::invalid_argument("patch has no fully opaque pixel");
}

RgbaImage default_cloud_patch(int size) {
  RgbaImage patch(size, size);
  // Cumulus silhouette: overlapping puffs above a flattened base.
  struct Puff {
    double cx, cy, r;
  };
  static constexpr std::array<Puff, 5> kPuffs{{
      {0.28, 0.60, 0.20},
      {0.46, 0.44, 0.25},
      {0.66, 0.50, 0.22},
      {0.78, 0.64, 0.16},
      {0.50, 0.64, 0.22},
  }};
  constexpr double kBase = 0.80;
  const double s = size;
  const double edge = std::max(1.0, s / 20.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      double inside = -1e9;  // signed distance into the union, in pixels
      for (const auto& p : kPuffs) {
        const double d = std::hypot(px - p.cx * s, py - p.cy * s);
        inside = std::max(inside, p.r * s - d);
      }
      inside = std::min(inside, kBase * s - py);
      const double alpha = std::clamp(0.5 + inside / edge, 0.0, 1.0);
      const double shade = 255.0 - 45.0 * std::clamp((py / s - 0.35) / 0.45, 0.0, 1.0);
      const auto c = static_cast<std::uint8_t>(std::nearbyint(shade));
      patch.at(x, y, 0) = c;
      patch.at(x, y, 1) = c;
      patch.at(x, y, 2) = static_cast<std::uint8_t>(std::min(255, c + 4));
      patch.at(x, y, 3) = static_cast<std::uint8_t>(std::nearbyint(alpha * 255.0));
    }
  }
  return patch;
}

std::pair<double, double> GridSchedule::center(SlotIndex slot, int width, int height) const {
  return {(slot.col + 0.5) * width / cols, (slot.row + 0.5) * height / rows};
}

PatchPlacement place_patch(double center_x, double center_y, int patch_width, int patch_height, int image_width,
                           int image_height) {
  PatchPlacement p;
  p.left = static_cast<int>(std::floor(center_x - patch_width / 2.0 + 0.5));
  p.top = static_cast<int>(std::floor(center_y - patch_height / 2.0 + 0.5));
  p.box = clip_box({static_cast<double>(p.left), static_cast<double>(p.top), static_cast<double>(p.left + patch_width),
                    static_cast<double>(p.top + patch_height)},
                   image_width, image_height);
  return p;
}

std::vector<Slot> enumerate_slots(int width, int height, const GridSchedule& grid, int patch_width,
                                  int patch_height) {
  if (width < 1 || height < 1) throw std::invalid_argument("image dimensions must be >= 1");
  if (grid.rows < 1 || grid.cols < 1) throw std::invalid_argument("grid must be at least 1x1");
  std::vector<Slot> slots;
  slots.reserve(static_cast<std::size_t>(grid.slot_count()));
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const auto [cx, cy] = grid.center({r, c}, width, height);
      slots.push_back({{r, c}, cx, cy, place_patch(cx, cy, patch_width, patch_height, width, height)});
    }
  }
  return slots;
}

void composite_patch(Image& image, const PatchSpec& patch, int left, int top) {
  const auto& src = patch.pixels;
  const int x_begin = std::max(0, -left);
  const int y_begin = std::max(0, -top);
  const int x_end = std::min(src.width(), image.width() - left);
  const int y_end = std::min(src.height(), image.height() - top);
  for (int v = y_begin; v < y_end; ++v) {
    for (int u = x_begin; u < x_end; ++u) {
      const int a = src.at(u, v, 3);
      if (a == 0) continue;
      const double alpha = a / 255.0;
      for (int c = 0; c < 3; ++c) {
        const double fg = std::min(255.0, src.at(u, v, c) * patch.brightness);
        auto& dst = image.at(left + u, top + v, c);
        dst = quantize(alpha * fg + (1.0 - alpha) * dst);
      }
    }
  }
}

std::pair<ImageRecord, BoundingBox> inject_patch(const ImageRecord& record, const PatchSpec& patch, SlotIndex slot,
                                                 const GridSchedule& grid) {
  if (slot.row < 0 || slot.row >= grid.rows || slot.col < 0 || slot.col >= grid.cols) {
    throw std::out_of_range("slot outside the grid");
  }
  if (patch.pixels.empty()) throw std::invalid_argument("patch raster is empty");
  const int w = record.pixels.width();
  const int h = record.pixels.height();
  const auto [cx, cy] = grid.center(slot, w, h);
  const PatchPlacement p = place_patch(cx, cy, patch.pixels.width(), patch.pixels.height(), w, h);
  ImageRecord out = record;
  composite_patch(out.pixels, patch, p.left, p.top);
  return {std::move(out), p.box};
}

}  // namespace warp
