#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "warp/perturb.hpp"
#include "warp/types.hpp"

namespace warp {

enum class AugmentVariant { kGaussianOverlay, kCloudPatch, kMosaic, kCrop2x2 };

std::string_view to_string(AugmentVariant v);
AugmentVariant augment_variant_from_string(std::string_view s);

/// x' = sx * x + tx, y' = sy * y + ty.
struct Affine {
  double sx = 1.0;
  double sy = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  BoundingBox apply(const BoundingBox& b) const {
    return {sx * b.x_min + tx, sy * b.y_min + ty, sx * b.x_max + tx, sy * b.y_max + ty};
  }
};

/// Region of the output image, continuous coordinates.
struct Region {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
};

struct SourceTransform {
  std::string image_id;
  Affine transform;
  Region region;  // where this source's content lands in the output
};

struct Provenance {
  AugmentVariant variant = AugmentVariant::kGaussianOverlay;
  std::vector<SourceTransform> sources;
  std::string parameters;  // JSON object text
  std::string resize = "bilinear";
};

struct AugmentedRecord {
  ImageRecord record;
  Provenance provenance;
};

inline constexpr double kMinSurvival = 0.2;

/// Maps every annotation through `transform`, clips to `region` and keeps
/// those whose clipped area is at least `min_survival` of the mapped area.
std::vector<GroundTruthAnnotation> remap_annotations(std::span<const GroundTruthAnnotation> annotations,
                                                     const Affine& transform, const Region& region,
                                                     double min_survival = kMinSurvival);

/// Fills `region` of `dst` by bilinear sampling `src` through the inverse of
/// `transform`, pixel centers at half-integers, edges clamped.
void resample_into(Image& dst, const Image& src, const Affine& transform, const Region& region);
Image resize_bilinear(const Image& src, int width, int height);

AugmentedRecord augment_gaussian(const ImageRecord& image, double a_min, double a_max, std::uint64_t seed);

enum class PatchZone { kMiddleHorizontal, kSkyUpper };

std::string_view to_string(PatchZone z);
PatchZone patch_zone_from_string(std::string_view s);

/// Grid rows of a zone: middle-horizontal is the central fifth (10..14 of 25),
/// sky-upper is every row above it (0..9).
std::vector<int> zone_rows(PatchZone zone, const GridSchedule& grid);

AugmentedRecord augment_cloud_patch(const ImageRecord& image, PatchZone zone, const PatchSpec& patch,
                                    const GridSchedule& grid, std::uint64_t seed);

struct MosaicLayout {
  int width = 640;
  int height = 640;
  int split_x = 320;
  int split_y = 320;
  std::array<Affine, 4> transforms;  // top-left, top-right, bottom-left, bottom-right
  std::array<Region, 4> regions;
};

/// Draws the split point uniformly from the central half of each axis and
/// scales each source (aspect preserved) to cover its quadrant, anchored at
/// the split point.
MosaicLayout plan_mosaic(std::span<const std::pair<int, int>> source_sizes, int width, int height,
                         std::uint64_t seed);
/// Same, with an explicit split point.
MosaicLayout layout_mosaic(std::span<const std::pair<int, int>> source_sizes, int width, int height,
                           int split_x, int split_y);

AugmentedRecord augment_mosaic(std::span<const ImageRecord> sources, int width, int height,
                               std::uint64_t seed, double min_survival = kMinSurvival);
AugmentedRecord augment_mosaic(std::span<const ImageRecord> sources, const MosaicLayout& layout,
                               double min_survival = kMinSurvival);

/// Quadrant k (0 TL, 1 TR, 2 BL, 3 BR) of a width x height image, and the
/// transform that takes it to a target_w x target_h frame.
Region crop_quadrant(int width, int height, int k);
Affine crop_transform(const Region& quadrant, int target_width, int target_height);

std::vector<AugmentedRecord> augment_crop2x2(const ImageRecord& image, int target_width = 640,
                                             int target_height = 640, double min_survival = kMinSurvival);

std::string provenance_json(const Provenance& provenance);

}  // namespace warp
