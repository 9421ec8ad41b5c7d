#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "warp/image.hpp"

namespace warp {

/// Axis-aligned box in corner form, continuous pixel coordinates. Pixel
/// (i, j) of an image covers [i, i+1] x [j, j+1].
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  static BoundingBox from_xywh(double x, double y, double w, double h) {
    return {x, y, x + w, y + h};
  }
  static BoundingBox from_cxcywh(double cx, double cy, double w, double h) {
    return {cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
  }

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double center_x() const { return (x_min + x_max) / 2.0; }
  double center_y() const { return (y_min + y_max) / 2.0; }

  /// Finite coordinates and strictly positive extent on both axes.
  bool valid() const;

  BoundingBox translated(double dx, double dy) const {
    return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Area in square pixels. Throws std::invalid_argument for degenerate boxes.
double box_area(const BoundingBox& box);

/// Intersection with [0,width] x [0,height]. The result may be degenerate.
BoundingBox clip_box(const BoundingBox& box, double width, double height);

struct Detection {
  BoundingBox box;
  double confidence = 0.0;
  int class_label = 1;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruthAnnotation {
  BoundingBox box;
  int class_label = 1;

  friend bool operator==(const GroundTruthAnnotation&, const GroundTruthAnnotation&) = default;
};

/// Throws std::invalid_argument if confidence is outside [0,1], the class is
/// not positive, or the box is invalid.
void validate_detection(const Detection& detection);

struct ImageRecord {
  std::string image_id;
  Image pixels;
  std::vector<GroundTruthAnnotation> annotations;
  std::string source;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// Image-level outcome: an image is a true positive when the detector reports
/// at least one box, a false negative otherwise.
enum class ImageClass { kTruePositive, kFalseNegative };

std::string_view to_string(ImageClass c);
ImageClass image_class_from_string(std::string_view s);

ImageClass classify_image_outcome(std::span<const Detection> detections);

struct EvalOutcome {
  std::string image_id;
  ImageClass original_class = ImageClass::kFalseNegative;
  std::vector<Detection> detections;

  friend bool operator==(const EvalOutcome&, const EvalOutcome&) = default;
};

inline EvalOutcome make_outcome(std::string image_id, std::vector<Detection> detections) {
  EvalOutcome out{std::move(image_id), classify_image_outcome(detections), std::move(detections)};
  return out;
}

}  // namespace warp
