#pragma once

#include <compare>
#include <cstdint>
#include <utility>
#include <vector>

#include "warp/image.hpp"
#include "warp/types.hpp"

namespace warp {

/// Population standard deviation over every channel value of the image.
double compute_sigma(const Image& image);

struct NoiseOverlayParams {
  double noise_level = 0.0;  // a, in [0,1]
  std::uint64_t seed = 0;
};

/// Pre-quantization overlay x' = (1-a) x + a sigma r, one standard normal
/// draw per channel value in interleaved row-major order.
std::vector<double> overlay_field(const Image& image, const NoiseOverlayParams& params);

/// overlay_field rounded half-to-even and clamped to [0,255].
Image global_overlay(const Image& image, const NoiseOverlayParams& params);
ImageRecord global_overlay(const ImageRecord& record, const NoiseOverlayParams& params);

struct PatchSpec {
  RgbaImage pixels;
  double brightness = 1.0;  // multiplier on patch RGB; 1.0 leaves the asset as is

  /// Throws std::invalid_argument unless the patch is non-empty, has at least
  /// one fully opaque pixel and a non-negative brightness.
  void validate() const;
};

/// Procedural soft-edged cumulus raster, size x size, used when no patch
/// asset is configured.
RgbaImage default_cloud_patch(int size = 25);

struct SlotIndex {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const SlotIndex&, const SlotIndex&) = default;
};

struct GridSchedule {
  int rows = 25;
  int cols = 25;

  int slot_count() const { return rows * cols; }
  int flat(SlotIndex s) const { return s.row * cols + s.col; }
  SlotIndex unflat(int index) const { return {index / cols, index % cols}; }

  /// ((c + 0.5) W / cols, (r + 0.5) H / rows).
  std::pair<double, double> center(SlotIndex slot, int width, int height) const;

  friend bool operator==(const GridSchedule&, const GridSchedule&) = default;
};

/// Where a patch lands: integer top-left of its pixel footprint (may be
/// negative) and the footprint clipped to the image.
struct PatchPlacement {
  int left = 0;
  int top = 0;
  BoundingBox box;
};

/// The patch footprint is snapped to whole pixels: left = floor(cx - w/2 + 0.5).
PatchPlacement place_patch(double center_x, double center_y, int patch_width, int patch_height,
                           int image_width, int image_height);

struct Slot {
  SlotIndex index;
  double center_x = 0.0;
  double center_y = 0.0;
  PatchPlacement placement;
};

/// All slots in row-major order. Patch boxes are always valid: the footprint
/// contains the slot center, which lies inside the image.
std::vector<Slot> enumerate_slots(int width, int height, const GridSchedule& grid,
                                  int patch_width = 25, int patch_height = 25);

/// Source-over composite of the patch centered on `slot`. Pixels outside the
/// footprint are untouched. Returns the perturbed record and the clipped
/// patch box.
std::pair<ImageRecord, BoundingBox> inject_patch(const ImageRecord& record, const PatchSpec& patch,
                                                 SlotIndex slot, const GridSchedule& grid);

/// In-place variant used by the sweep inner loop.
void composite_patch(Image& image, const PatchSpec& patch, int left, int top);

}  // namespace warp
