#include "warp/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace warp {

bool BoundingBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) && std::isfinite(y_max) &&
         x_min < x_max && y_min < y_max;
}

double box_area(const BoundingBox& box) {
  if (!box.valid()) {
    throw std::invalid_argument("degenerate bounding box");
  }
  return box.width() * box.height();
}

BoundingBox clip_box(const BoundingBox& box, double width, double height) {
  return {std::clamp(box.x_min, 0.0, width), std::clamp(box.y_min, 0.0, height),
          std::clamp(box.x_max, 0.0, width), std::clamp(box.y_max, 0.0, height)};
}

void validate_detection(const Detection& detection) {
  if (!(detection.confidence >= 0.0 && detection.confidence <= 1.0)) {
    throw std::invalid_argument("detection confidence outside [0,1]");
  }
  if (detection.class_label < 1) {
    throw std::invalid_argument("detection class label must be >= 1");
  }
  if (!detection.box.valid()) {
    throw std::invalid_argument("detection box is degenerate");
  }
}

std::string_view to_string(ImageClass c) {
  return c == ImageClass::kTruePositive ? "TP" : "FN";
}

ImageClass image_class_from_string(std::string_view s) {
  if (s == "TP") return ImageClass::kTruePositive;
  if (s == "FN") return ImageClass::kFalseNegative;
  throw std::invalid_argument("unknown image class '" + std::string(s) + "'");
}

ImageClass classify_image_outcome(std::span<const Detection> detections) {
  return detections.empty() ? ImageClass::kFalseNegative : ImageClass::kTruePositive;
}

}  // namespace warp
