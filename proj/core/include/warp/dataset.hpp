#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "warp/image.hpp"
#include "warp/types.hpp"

namespace warp {

struct ImageEntry {
  std::string image_id;
  std::filesystem::path file;  // relative to DatasetManifest::root unless absolute
  int width = 0;
  int height = 0;
  std::string source;

  friend bool operator==(const ImageEntry&, const ImageEntry&) = default;
};

struct AnnotationEntry {
  std::string image_id;
  BoundingBox box;
  int class_label = 1;

  friend bool operator==(const AnnotationEntry&, const AnnotationEntry&) = default;
};

/// COCO-detection style dataset description.
struct DatasetManifest {
  std::string name;
  std::string split;
  std::vector<ImageEntry> images;
  std::vector<AnnotationEntry> annotations;
  std::map<int, std::string> classes;
  std::filesystem::path root;  // directory file paths resolve against

  std::filesystem::path resolve(const ImageEntry& entry) const;
  /// Annotations of one image, in manifest order.
  std::vector<GroundTruthAnnotation> annotations_for(const std::string& image_id) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

enum class BoxFormat { kXywh, kXyxy, kCxcywh };

struct LoadOptions {
  /// Decode every image and compare against the declared width/height.
  bool verify_images = true;
};

/// Parses and validates a manifest. Throws DataError naming the offending
/// record on missing files, malformed JSON, dangling image ids, duplicate ids,
/// invalid boxes or dimension mismatches.
DatasetManifest load_manifest(const std::filesystem::path& path, LoadOptions options = {});

/// Parses manifest text; `root` is where relative image paths resolve.
DatasetManifest parse_manifest(const std::string& json_text, const std::filesystem::path& root,
                               LoadOptions options = {});

/// Runs every manifest invariant. Throws DataError on the first violation.
void validate_manifest(const DatasetManifest& manifest, LoadOptions options = {});

/// Writes COCO xywh JSON. Image paths are written relative to the manifest's
/// directory when they live under it.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);

/// Decodes PNG/JPEG into 8-bit RGB; grayscale is replicated across channels.
Image load_image(const std::filesystem::path& path);
Image decode_image(std::span<const std::uint8_t> bytes);
RgbaImage load_rgba(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& image);
void save_png(const Image& image, const std::filesystem::path& path);
void save_png(const RgbaImage& image, const std::filesystem::path& path);

/// Random access to the pixel data of a dataset.
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual std::size_t size() const = 0;
  virtual ImageRecord load(std::size_t index) const = 0;
  virtual std::string image_id(std::size_t index) const = 0;
};

/// In-memory records, used by tests and by small synthetic runs.
class VectorImageSource final : public ImageSource {
 public:
  explicit VectorImageSource(std::vector<ImageRecord> records) : records_(std::move(records)) {}
  std::size_t size() const override { return records_.size(); }
  ImageRecord load(std::size_t index) const override { return records_.at(index); }
  std::string image_id(std::size_t index) const override { return records_.at(index).image_id; }
  const std::vector<ImageRecord>& records() const { return records_; }

 private:
  std::vector<ImageRecord> records_;
};

/// Decodes images from a manifest on demand, keeping up to `cache_limit`
/// decoded records in memory.
class ManifestImageSource final : public ImageSource {
 public:
  explicit ManifestImageSource(DatasetManifest manifest, std::size_t cache_limit = 64);
  std::size_t size() const override { return manifest_.images.size(); }
  ImageRecord load(std::size_t index) const override;
  std::string image_id(std::size_t index) const override { return manifest_.images.at(index).image_id; }
  const DatasetManifest& manifest() const { return manifest_; }

 private:
  DatasetManifest manifest_;
  std::size_t cache_limit_;
  mutable std::mutex mutex_;
  mutable std::map<std::size_t, std::shared_ptr<const ImageRecord>> cache_;
};

/// Annotation positions counted on a rows x cols grid by box center.
struct AnnotationHeatmap {
  int rows = 25;
  int cols = 25;
  std::vector<std::int64_t> counts;  // row-major
  std::int64_t total = 0;

  std::int64_t at(int row, int col) const { return counts.at(static_cast<std::size_t>(row) * cols + col); }

  friend bool operator==(const AnnotationHeatmap&, const AnnotationHeatmap&) = default;
};

AnnotationHeatmap annotation_heatmap(const DatasetManifest& manifest, int rows = 25, int cols = 25);

/// One CSV line per grid row, comma-separated counts.
std::string heatmap_csv(const AnnotationHeatmap& heatmap);
AnnotationHeatmap parse_heatmap_csv(const std::string& csv);
std::string heatmap_json(const AnnotationHeatmap& heatmap);

}  // namespace warp
