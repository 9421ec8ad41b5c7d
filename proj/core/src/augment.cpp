#include "warp/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json_io.hpp"
#include "warp/errors.hpp"
#include "warp/metrics.hpp"
#include "warp/rng.hpp"

namespace warp {
namespace {

using detail::json;

constexpr std::array<std::string_view, 4> kVariantNames{"gaussian_overlay", "cloud_patch", "mosaic", "crop2x2"};
constexpr std::array<std::string_view, 2> kZoneNames{"middle_horizontal", "sky_upper"};

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0)); }

SourceTransform identity_source(const ImageRecord& image) {
  return {image.image_id, Affine{},
          Region{0.0, 0.0, static_cast<double>(image.pixels.width()), static_cast<double>(image.pixels.height())}};
}

}  // namespace

std::string_view to_string(AugmentVariant v) { return kVariantNames.at(static_cast<std::size_t>(v)); }

AugmentVariant augment_variant_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i) {
    if (kVariantNames[i] == s) return static_cast<AugmentVariant>(i);
  }
  throw ConfigError("unknown augmentation variant: " + std::string(s));
}

std::string_view to_string(PatchZone z) { return kZoneNames.at(static_cast<std::size_t>(z)); }

PatchZone patch_zone_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kZoneNames.size(); ++i) {
    if (kZoneNames[i] == s) return static_cast<PatchZone>(i);
  }
  throw ConfigError("unknown patch zone: " + std::string(s));
}

std::vector<GroundTruthAnnotation> remap_annotations(std::span<const GroundTruthAnnotation> annotations,
                                                     const Affine& transform, const Region& region,
                                                     double min_survival) {
  std::vector<GroundTruthAnnotation> out;
  for (const auto& ann : annotations) {
    const BoundingBox mapped = transform.apply(ann.box);
    const double mapped_area = (mapped.x_max - mapped.x_min) * (mapped.y_max - mapped.y_min);
    if (!(mapped_area > 0.0)) continue;
    const BoundingBox clipped{std::max(mapped.x_min, region.x0), std::max(mapped.y_min, region.y0),
                              std::min(mapped.x_max, region.x1), std::min(mapped.y_max, region.y1)};
    if (!(clipped.x_max > clipped.x_min && clipped.y_max > clipped.y_min)) continue;
    const double clipped_area = (clipped.x_max - clipped.x_min) * (clipped.y_max - clipped.y_min);
    if (clipped_area < min_survival * mapped_area) continue;
    out.push_back({clipped, ann.class_label});
  }
  return out;
}

void resample_into(Image& dst, const Image& src, const Affine& transform, const Region& region) {
  if (!(transform.sx > 0.0 && transform.sy > 0.0)) throw std::invalid_argument("affine scale must be positive");
  // Pixels whose centers fall inside the region.
  const int x_begin = std::max(0, static_cast<int>(std::ceil(region.x0 - 0.5)));
  const int y_begin = std::max(0, static_cast<int>(std::ceil(region.y0 - 0.5)));
  const int x_end = std::min(dst.width(), static_cast<int>(std::ceil(region.x1 - 0.5)));
  const int y_end = std::min(dst.height(), static_cast<int>(std::ceil(region.y1 - 0.5)));
  const int sw = src.width();
  const int sh = src.height();
  for (int y = y_begin; y < y_end; ++y) {
    const double v = (y + 0.5 - transform.ty) / transform.sy - 0.5;
    const double fy0 = std::floor(v);
    const double wy = v - fy0;
    const int y0 = std::clamp(static_cast<int>(fy0), 0, sh - 1);
    const int y1 = std::clamp(static_cast<int>(fy0) + 1, 0, sh - 1);
    for (int x = x_begin; x < x_end; ++x) {
      const double u = (x + 0.5 - transform.tx) / transform.sx - 0.5;
      const double fx0 = std::floor(u);
      const double wx = u - fx0;
      const int x0 = std::clamp(static_cast<int>(fx0), 0, sw - 1);
      const int x1 = std::clamp(static_cast<int>(fx0) + 1, 0, sw - 1);
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * src.at(x0, y0, c) + wx * src.at(x1, y0, c);
        const double bottom = (1.0 - wx) * src.at(x0, y1, c) + wx * src.at(x1, y1, c);
        dst.at(x, y, c) = quantize((1.0 - wy) * top + wy * bottom);
      }
    }
  }
}

Image resize_bilinear(const Image& src, int width, int height) {
  Image out(width, height);
  const Affine t{static_cast<double>(width) / src.width(), static_cast<double>(height) / src.height(), 0.0, 0.0};
  resample_into(out, src, t, Region{0.0, 0.0, static_cast<double>(width), static_cast<double>(height)});
  return out;
}

AugmentedRecord augment_gaussian(const ImageRecord& image, double a_min, double a_max, std::uint64_t seed) {
  if (!(a_min >= 0.0 && a_max <= 1.0 && a_min <= a_max)) throw ConfigError("noise range must satisfy 0 <= min <= max <= 1");
  Rng rng(seed);
  const double a = rng.uniform(a_min, a_max);
  const std::uint64_t noise_seed = derive_seed(seed, image.image_id, 0);
  AugmentedRecord out{global_overlay(image, NoiseOverlayParams{a, noise_seed}), {}};
  out.record.image_id = image.image_id + "_gauss";
  out.provenance.variant = AugmentVariant::kGaussianOverlay;
  out.provenance.sources = {identity_source(image)};
  out.provenance.parameters = json{{"noise_level", a}, {"noise_seed", noise_seed}}.dump();
  out.provenance.resize = "none";
  return out;
}

std::vector<int> zone_rows(PatchZone zone, const GridSchedule& grid) {
  const auto [first, last] = middle_band_rows(grid.rows);
  std::vector<int> rows;
  if (zone == PatchZone::kMiddleHorizontal) {
    for (int r = first; r <= last; ++r) rows.push_back(r);
  } else {
    for (int r = 0; r < first; ++r) rows.push_back(r);
  }
  return rows;
}

AugmentedRecord augment_cloud_patch(const ImageRecord& image, PatchZone zone, const PatchSpec& patch,
                                    const GridSchedule& grid, std::uint64_t seed) {
  const auto rows = zone_rows(zone, grid);
  if (rows.empty()) throw ConfigError("patch zone has no grid rows");
  Rng rng(seed);
  const int row = rows[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(rows.size()) - 1))];
  const int col = static_cast<int>(rng.uniform_int(0, grid.cols - 1));
  auto [record, box] = inject_patch(image, patch, SlotIndex{row, col}, grid);
  AugmentedRecord out{std::move(record), {}};
  out.record.image_id = image.image_id + "_cloud";
  out.provenance.variant = AugmentVariant::kCloudPatch;
  out.provenance.sources = {identity_source(image)};
  out.provenance.parameters = json{{"zone", std::string(to_string(zone))},
                                   {"row", row},
                                   {"col", col},
                                   {"brightness", patch.brightness},
                                   {"patch_box", detail::box_to_json(box)}}
                                  .dump();
  out.provenance.resize = "none";
  return out;
}

MosaicLayout layout_mosaic(std::span<const std::pair<int, int>> source_sizes, int width, int height, int split_x,
                           int split_y) {
  if (source_sizes.size() != 4) throw std::invalid_argument("mosaic needs exactly 4 sources");
  if (width < 2 || height < 2) throw std::invalid_argument("mosaic output must be at least 2x2");
  if (split_x < 1 || split_x >= width || split_y < 1 || split_y >= height) {
    throw std::invalid_argument("mosaic split point must leave every quadrant non-empty");
  }
  MosaicLayout m{width, height, split_x, split_y, {}, {}};
  const double sx = split_x;
  const double sy = split_y;
  const double w = width;
  const double h = height;
  m.regions = {Region{0, 0, sx, sy}, Region{sx, 0, w, sy}, Region{0, sy, sx, h}, Region{sx, sy, w, h}};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto [src_w, src_h] = source_sizes[k];
    if (src_w < 1 || src_h < 1) throw std::invalid_argument("mosaic source has no pixels");
    const Region& r = m.regions[k];
    const double s = std::max((r.x1 - r.x0) / src_w, (r.y1 - r.y0) / src_h);
    const double scaled_w = s * src_w;
    const double scaled_h = s * src_h;
    // Anchor the scaled source at the split point so the seam carries the
    // source corner that faces the center.
    const double tx = (k == 0 || k == 2) ? sx - scaled_w : sx;
    const double ty = (k == 0 || k == 1) ? sy - scaled_h : sy;
    m.transforms[k] = Affine{s, s, tx, ty};
  }
  return m;
}

MosaicLayout plan_mosaic(std::span<const std::pair<int, int>> source_sizes, int width, int height,
                         std::uint64_t seed) {
  Rng rng(seed);
  const auto lo_x = static_cast<std::int64_t>(std::ceil(0.25 * width));
  const auto hi_x = static_cast<std::int64_t>(std::floor(0.75 * width));
  const auto lo_y = static_cast<std::int64_t>(std::ceil(0.25 * height));
  const auto hi_y = static_cast<std::int64_t>(std::floor(0.75 * height));
  const int split_x = static_cast<int>(rng.uniform_int(std::max<std::int64_t>(lo_x, 1), std::min<std::int64_t>(hi_x, width - 1)));
  const int split_y = static_cast<int>(rng.uniform_int(std::max<std::int64_t>(lo_y, 1), std::min<std::int64_t>(hi_y, height - 1)));
  return layout_mosaic(source_sizes, width, height, split_x, split_y);
}

AugmentedRecord augment_mosaic(std::span<const ImageRecord> sources, const MosaicLayout& layout,
                               double min_survival) {
  if (sources.size() != 4) throw std::invalid_argument("mosaic needs exactly 4 sources");
  AugmentedRecord out;
  out.record.pixels = Image(layout.width, layout.height);
  out.record.image_id = "mosaic";
  for (std::size_t k = 0; k < 4; ++k) {
    resample_into(out.record.pixels, sources[k].pixels, layout.transforms[k], layout.regions[k]);
    auto anns = remap_annotations(sources[k].annotations, layout.transforms[k], layout.regions[k], min_survival);
    out.record.annotations.insert(out.record.annotations.end(), anns.begin(), anns.end());
    out.record.image_id += "_" + sources[k].image_id;
    out.provenance.sources.push_back({sources[k].image_id, layout.transforms[k], layout.regions[k]});
  }
  out.provenance.variant = AugmentVariant::kMosaic;
  out.provenance.parameters = json{{"width", layout.width},
                                   {"height", layout.height},
                                   {"split_x", layout.split_x},
                                   {"split_y", layout.split_y},
                                   {"min_survival", min_survival}}
                                  .dump();
  return out;
}

AugmentedRecord augment_mosaic(std::span<const ImageRecord> sources, int width, int height, std::uint64_t seed,
                               double min_survival) {
  if (sources.size() != 4) throw std::invalid_argument("mosaic needs exactly 4 sources");
  std::vector<std::pair<int, int>> sizes;
  for (const auto& s : sources) sizes.emplace_back(s.pixels.width(), s.pixels.height());
  return augment_mosaic(sources, plan_mosaic(sizes, width, height, seed), min_survival);
}

Region crop_quadrant(int width, int height, int k) {
  if (width < 2 || height < 2) throw std::invalid_argument("crop source must be at least 2x2");
  if (k < 0 || k > 3) throw std::out_of_range("quadrant index must be 0..3");
  const double mx = width / 2;
  const double my = height / 2;
  const double w = width;
  const double h = height;
  const std::array<Region, 4> q{Region{0, 0, mx, my}, Region{mx, 0, w, my}, Region{0, my, mx, h}, Region{mx, my, w, h}};
  return q[static_cast<std::size_t>(k)];
}

Affine crop_transform(const Region& quadrant, int target_width, int target_height) {
  const double sx = target_width / (quadrant.x1 - quadrant.x0);
  const double sy = target_height / (quadrant.y1 - quadrant.y0);
  return Affine{sx, sy, -quadrant.x0 * sx, -quadrant.y0 * sy};
}

std::vector<AugmentedRecord> augment_crop2x2(const ImageRecord& image, int target_width, int target_height,
                                             double min_survival) {
  if (target_width < 1 || target_height < 1) throw std::invalid_argument("crop target must be non-empty");
  const Region frame{0.0, 0.0, static_cast<double>(target_width), static_cast<double>(target_height)};
  std::vector<AugmentedRecord> out;
  for (int k = 0; k < 4; ++k) {
    const Region q = crop_quadrant(image.pixels.width(), image.pixels.height(), k);
    const Affine t = crop_transform(q, target_width, target_height);
    AugmentedRecord rec;
    rec.record.image_id = image.image_id + "_q" + std::to_string(k);
    rec.record.pixels = Image(target_width, target_height);
    resample_into(rec.record.pixels, image.pixels, t, frame);
    rec.record.annotations = remap_annotations(image.annotations, t, frame, min_survival);
    rec.provenance.variant = AugmentVariant::kCrop2x2;
    rec.provenance.sources = {{image.image_id, t, frame}};
    rec.provenance.parameters = json{{"quadrant", k},
                                     {"crop", json::array({q.x0, q.y0, q.x1, q.y1})},
                                     {"min_survival", min_survival}}
                                    .dump();
    out.push_back(std::move(rec));
  }
  return out;
}

std::string provenance_json(const Provenance& provenance) {
  json sources = json::array();
  for (const auto& s : provenance.sources) {
    sources.push_back(json{{"image_id", s.image_id},
                           {"transform", json{{"sx", s.transform.sx},
                                              {"sy", s.transform.sy},
                                              {"tx", s.transform.tx},
                                              {"ty", s.transform.ty}}},
                           {"region", json::array({s.region.x0, s.region.y0, s.region.x1, s.region.y1})}});
  }
  return json{{"variant", std::string(to_string(provenance.variant))},
              {"resize", provenance.resize},
              {"parameters", provenance.parameters.empty() ? json::object() : json::parse(provenance.parameters)},
              {"sources", std::move(sources)}}
      .dump();
}

}  // namespace warp
