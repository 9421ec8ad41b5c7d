#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "warp/perturb.hpp"
#include "warp/types.hpp"

namespace warp {

/// |A ∩ B| / |A ∪ B| on continuous areas.
double iou(const BoundingBox& a, const BoundingBox& b);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;

  friend bool operator==(const PRPoint&, const PRPoint&) = default;
};

struct PRCurve {
  std::vector<PRPoint> points;  // one per ranked detection
  std::size_t ground_truths = 0;
};

using DetectionsPerImage = std::vector<std::vector<Detection>>;
using GroundTruthPerImage = std::vector<std::vector<GroundTruthAnnotation>>;

/// Precision/recall after each prefix of the confidence ranking of
/// `class_label` detections pooled over all images. Ranking is by descending
/// confidence, ties by (image index, detection index). Each detection claims
/// the unmatched same-class ground truth in its image with the highest
/// IoU >= threshold; IoU ties go to the lower ground-truth index.
PRCurve pr_curve(std::span<const std::vector<Detection>> detections,
                 std::span<const std::vector<GroundTruthAnnotation>> ground_truths, int class_label,
                 double iou_threshold);

/// Trapezoid over the raw curve with an anchor at recall 0 carrying the
/// first precision. Empty curve gives 0.
double average_precision(const PRCurve& curve);

struct APResult {
  double ap = 0.0;  // mean over evaluated classes
  double iou_threshold = 0.5;
  std::map<int, double> per_class;
};

APResult average_precision_at(std::span<const std::vector<Detection>> detections,
                              std::span<const std::vector<GroundTruthAnnotation>> ground_truths,
                              double iou_threshold);

/// {0.50, 0.55, ..., 0.95}.
std::vector<double> default_iou_thresholds();

struct MapScores {
  double map50 = 0.0;
  double map50_95 = 0.0;
  std::vector<APResult> per_threshold;
  std::vector<int> classes;           // classes with at least one ground truth
  std::vector<int> excluded_classes;  // detected but never annotated
};

/// mAP over classes with ground truth, at every threshold; map50 is the
/// entry at 0.50, map50_95 the mean over all thresholds given.
MapScores map_scores(std::span<const std::vector<Detection>> detections,
                     std::span<const std::vector<GroundTruthAnnotation>> ground_truths,
                     std::span<const double> thresholds);
MapScores map_scores(std::span<const std::vector<Detection>> detections,
                     std::span<const std::vector<GroundTruthAnnotation>> ground_truths);

struct PercentageLoss {
  /// (original - after) / original * 100; empty when original is 0.
  std::optional<double> loss;
  /// (after - original) / original * 100, the literal signed form.
  std::optional<double> signed_loss;
};

PercentageLoss map_percentage_loss(double map_original, double map_after);

/// Outcome of one injection slot.
struct SlotRecord {
  bool evaluated = true;
  bool flipped = false;   // image-level class differs from the baseline
  bool deceived = false;  // some detection has IoU >= 0.5 with the patch box

  friend bool operator==(const SlotRecord&, const SlotRecord&) = default;
};

struct GridSweepResult {
  std::string image_id;
  ImageClass original_class = ImageClass::kFalseNegative;
  GridSchedule grid;
  std::vector<SlotRecord> slots;  // row-major, grid.slot_count() entries

  int attempts() const { return grid.slot_count(); }
  int deceived_count() const;
  int flip_count() const;
  int unevaluated_count() const;
  double gamma() const { return static_cast<double>(deceived_count()) / attempts(); }

  friend bool operator==(const GridSweepResult&, const GridSweepResult&) = default;
};

struct FlipProbabilities {
  double alpha = 0.0;  // TP -> FN
  double beta = 0.0;   // FN -> TP
};

/// Per-image alpha/beta. Throws std::invalid_argument naming the missing
/// slots if the record count differs from the grid's slot count.
FlipProbabilities flip_probabilities(const GridSweepResult& result);

/// Mean over all images, zeros included for the class that does not apply.
/// Throws std::invalid_argument for an empty set.
FlipProbabilities expected_flip_probabilities(std::span<const GridSweepResult> results);

inline constexpr double kDeceptionIou = 0.5;

bool slot_deceived(std::span<const Detection> detections, const BoundingBox& patch_box,
                   double iou_threshold = kDeceptionIou);

struct DeceptionRate {
  int deceived = 0;  // D_i
  int attempts = 0;  // A_i
  double gamma = 0.0;
};

/// One detection list and one patch box per slot.
DeceptionRate deception_rate(std::span<const std::vector<Detection>> detections_per_slot,
                             std::span<const BoundingBox> patch_boxes,
                             double iou_threshold = kDeceptionIou);

struct GammaSummary {
  double expected = 0.0;
  /// D_i -> number of images with that count; gamma = D_i / attempts.
  std::map<int, std::int64_t> frequency;
  int attempts = 625;
  std::int64_t images = 0;
};

/// E[gamma] and frequency table from per-image deceived counts.
GammaSummary expected_deception_rate(std::span<const int> deceived_counts, int attempts = 625);

/// Sum(value * frequency) / Sum(frequency) over a value -> frequency table.
/// Throws std::invalid_argument when the total frequency is zero.
double expectation_from_frequency(const std::map<double, std::int64_t>& table);

struct DeceptionMap {
  int rows = 25;
  int cols = 25;
  std::vector<std::int64_t> counts;  // row-major
  std::int64_t total = 0;
  int band_first_row = 10;
  int band_last_row = 14;
  /// Fraction of deceptions in the middle-horizontal band; empty when total is 0.
  std::optional<double> middle_share;

  std::int64_t at(int row, int col) const { return counts.at(static_cast<std::size_t>(row) * cols + col); }
};

/// Central fifth of the grid rows: rows 10..14 of 25.
std::pair<int, int> middle_band_rows(int rows);

DeceptionMap cumulative_deception_map(std::span<const GridSweepResult> results);

}  // namespace warp
