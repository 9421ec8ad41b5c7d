#include "warp/metrics.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace warp {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = box_area(a) + box_area(b) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

PRCurve pr_curve(std::span<const std::vector<Detection>> detections,
                 std::span<const std::vector<GroundTruthAnnotation>> ground_truths, int class_label,
                 double iou_threshold) {
  if (detections.size() != ground_truths.size()) {
    throw std::invalid_argument("detections and ground truths cover different image counts");
  }
  struct Ranked {
    double confidence;
    std::size_t image;
    std::size_t index;
  };
  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (std::size_t j = 0; j < detections[i].size(); ++j) {
      if (detections[i][j].class_label == class_label) ranked.push_back({detections[i][j].confidence, i, j});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });

  PRCurve curve;
  std::vector<std::vector<bool>> matched(ground_truths.size());
  for (std::size_t i = 0; i < ground_truths.size(); ++i) {
    matched[i].assign(ground_truths[i].size(), false);
    for (const auto& g : ground_truths[i]) {
      if (g.class_label == class_label) ++curve.ground_truths;
    }
  }

  std::size_t tp = 0;
  std::size_t fp = 0;
  curve.points.reserve(ranked.size());
  for (const auto& r : ranked) {
    const Detection& det = detections[r.image][r.index];
    const auto& gts = ground_truths[r.image];
    double best = -1.0;
    std::size_t best_index = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (matched[r.image][g] || gts[g].class_label != class_label) continue;
      const double overlap = iou(det.box, gts[g].box);
      if (overlap >= iou_threshold && overlap > best) {
        best = overlap;
        best_index = g;
      }
    }
    if (best_index < gts.size()) {
      matched[r.image][best_index] = true;
      ++tp;
    } else {
      ++fp;
    }
    const double recall = curve.ground_truths ? static_cast<double>(tp) / curve.ground_truths : 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    curve.points.push_back({recall, precision});
  }
  return curve;
}

double average_precision(const PRCurve& curve) {
  if (curve.points.empty()) return 0.0;
  double area = 0.0;
  double prev_recall = 0.0;
  double prev_precision = curve.points.front().precision;
  for (const auto& p : curve.points) {
    area += (p.recall - prev_recall) * (p.precision + prev_precision) / 2.0;
    prev_recall = p.recall;
    prev_precision = p.precision;
  }
  return std::clamp(area, 0.0, 1.0);
}

namespace {

std::pair<std::vector<int>, std::vector<int>> class_sets(std::span<const std::vector<Detection>> detections,
                                                         std::span<const std::vector<GroundTruthAnnotation>> gts) {
  std::set<int> with_gt;
  std::set<int> detected;
  for (const auto& img : gts) {
    for (const auto& g : img) with_gt.insert(g.class_label);
  }
  for (const auto& img : detections) {
    for (const auto& d : img) detected.insert(d.class_label);
  }
  std::vector<int> excluded;
  for (int c : detected) {
    if (!with_gt.contains(c)) excluded.push_back(c);
  }
  return {{with_gt.begin(), with_gt.end()}, excluded};
}

APResult ap_for_classes(std::span<const std::vector<Detection>> detections,
                        std::span<const std::vector<GroundTruthAnnotation>> gts, const std::vector<int>& classes,
                        double threshold) {
  APResult r;
  r.iou_threshold = threshold;
  double sum = 0.0;
  for (int c : classes) {
    const double ap = average_precision(pr_curve(detections, gts, c, threshold));
    r.per_class[c] = ap;
    sum += ap;
  }
  r.ap = classes.empty() ? 0.0 : sum / static_cast<double>(classes.size());
  return r;
}

}  // namespace

APResult average_precision_at(std::span<const std::vector<Detection>> detections,
                              std::span<const std::vector<GroundTruthAnnotation>> ground_truths,
                              double iou_threshold) {
  const auto [classes, excluded] = class_sets(detections, ground_truths);
  return ap_for_classes(detections, ground_truths, classes, iou_threshold);
}

std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  for (int pct = 50; pct <= 95; pct += 5) t.push_back(pct / 100.0);
  return t;
}

MapScores map_scores(std::span<const std::vector<Detection>> detections,
                     std::span<const std::vector<GroundTruthAnnotation>> ground_truths,
                     std::span<const double> thresholds) {
  if (thresholds.empty()) throw std::invalid_argument("at least one IoU threshold is required");
  if (detections.size() != ground_truths.size()) {
    throw std::invalid_argument("detections and ground truths cover different image counts");
  }
  MapScores s;
  std::tie(s.classes, s.excluded_classes) = class_sets(detections, ground_truths);
  double sum = 0.0;
  bool have50 = false;
  for (double t : thresholds) {
    s.per_threshold.push_back(ap_for_classes(detections, ground_truths, s.classes, t));
    sum += s.per_threshold.back().ap;
    if (t == 0.5) {
      s.map50 = s.per_threshold.back().ap;
      have50 = true;
    }
  }
  if (!have50) s.map50 = ap_for_classes(detections, ground_truths, s.classes, 0.5).ap;
  s.map50_95 = sum / static_cast<double>(thresholds.size());
  return s;
}

MapScores map_scores(std::span<const std::vector<Detection>> detections,
                     std::span<const std::vector<GroundTruthAnnotation>> ground_truths) {
  const auto t = default_iou_thresholds();
  return map_scores(detections, ground_truths, t);
}

PercentageLoss map_percentage_loss(double map_original, double map_after) {
  if (map_original == 0.0) return {};
  return {(map_original - map_after) / map_original * 100.0, (map_after - map_original) / map_original * 100.0};
}

int GridSweepResult::deceived_count() const {
  return static_cast<int>(std::count_if(slots.begin(), slots.end(), [](const SlotRecord& s) { return s.deceived; }));
}

int GridSweepResult::flip_count() const {
  return static_cast<int>(std::count_if(slots.begin(), slots.end(), [](const SlotRecord& s) { return s.flipped; }));
}

int GridSweepResult::unevaluated_count() const {
  return static_cast<int>(
      std::count_if(slots.begin(), slots.end(), [](const SlotRecord& s) { return !s.evaluated; }));
}

FlipProbabilities flip_probabilities(const GridSweepResult& result) {
  const int expected = result.attempts();
  if (static_cast<int>(result.slots.size()) != expected) {
    std::string missing;
    const int first_missing = static_cast<int>(result.slots.size());
    for (int i = first_missing; i < expected && i < first_missing + 5; ++i) {
      const auto s = result.grid.unflat(i);
      missing += (missing.empty() ? "" : ", ") + std::string("(") + std::to_string(s.row) + "," +
                 std::to_string(s.col) + ")";
    }
    if (expected - first_missing > 5) missing += ", ...";
    throw std::invalid_argument("image " + result.image_id + " has " + std::to_string(result.slots.size()) +
                                " slot records, expected " + std::to_string(expected) +
                                (missing.empty() ? std::string() : "; missing slots " + missing));
  }
  const double p = static_cast<double>(result.flip_count()) / expected;
  if (result.original_class == ImageClass::kTruePositive) return {p, 0.0};
  return {0.0, p};
}

FlipProbabilities expected_flip_probabilities(std::span<const GridSweepResult> results) {
  if (results.empty()) throw std::invalid_argument("expected flip probabilities need at least one image");
  FlipProbabilities sum;
  for (const auto& r : results) {
    const auto f = flip_probabilities(r);
    sum.alpha += f.alpha;
    sum.beta += f.beta;
  }
  const double k = static_cast<double>(results.size());
  return {sum.alpha / k, sum.beta / k};
}

bool slot_deceived(std::span<const Detection> detections, const BoundingBox& patch_box, double iou_threshold) {
  return std::any_of(detections.begin(), detections.end(),
                     [&](const Detection& d) { return iou(d.box, patch_box) >= iou_threshold; });
}

DeceptionRate deception_rate(std::span<const std::vector<Detection>> detections_per_slot,
                             std::span<const BoundingBox> patch_boxes, double iou_threshold) {
  if (detections_per_slot.size() != patch_boxes.size()) {
    throw std::invalid_argument("one patch box is required per slot");
  }
  DeceptionRate r;
  r.attempts = static_cast<int>(patch_boxes.size());
  for (std::size_t i = 0; i < patch_boxes.size(); ++i) {
    if (slot_deceived(detections_per_slot[i], patch_boxes[i], iou_threshold)) ++r.deceived;
  }
  r.gamma = r.attempts ? static_cast<double>(r.deceived) / r.attempts : 0.0;
  return r;
}

GammaSummary expected_deception_rate(std::span<const int> deceived_counts, int attempts) {
  if (deceived_counts.empty()) throw std::invalid_argument("expected deception rate needs at least one image");
  if (attempts < 1) throw std::invalid_argument("attempts must be >= 1");
  GammaSummary g;
  g.attempts = attempts;
  g.images = static_cast<std::int64_t>(deceived_counts.size());
  for (int d : deceived_counts) {
    if (d < 0 || d > attempts) throw std::invalid_argument("deceived count outside [0, attempts]");
    ++g.frequency[d];
  }
  std::map<double, std::int64_t> table;
  for (const auto& [d, n] : g.frequency) table[static_cast<double>(d) / attempts] += n;
  g.expected = expectation_from_frequency(table);
  return g;
}

double expectation_from_frequency(const std::map<double, std::int64_t>& table) {
  double weighted = 0.0;
  std::int64_t total = 0;
  for (const auto& [value, freq] : table) {
    if (freq < 0) throw std::invalid_argument("negative frequency");
    weighted += value * static_cast<double>(freq);
    total += freq;
  }
  if (total == 0) throw std::invalid_argument("frequency table is empty");
  return weighted / static_cast<double>(total);
}

std::pair<int, int> middle_band_rows(int rows) {
  const int band = std::max(1, rows / 5);
  const int first = (rows - band) / 2;
  return {first, first + band - 1};
}

DeceptionMap cumulative_deception_map(std::span<const GridSweepResult> results) {
  DeceptionMap m;
  if (!results.empty()) {
    m.rows = results.front().grid.rows;
    m.cols = results.front().grid.cols;
  }
  std::tie(m.band_first_row, m.band_last_row) = middle_band_rows(m.rows);
  m.counts.assign(static_cast<std::size_t>(m.rows) * m.cols, 0);
  for (const auto& r : results) {
    if (r.grid.rows != m.rows || r.grid.cols != m.cols || static_cast<int>(r.slots.size()) != m.rows * m.cols) {
      throw std::invalid_argument("image " + r.image_id + " uses a different grid");
    }
    for (std::size_t i = 0; i < r.slots.size(); ++i) {
      if (r.slots[i].deceived) {
        ++m.counts[i];
        ++m.total;
      }
    }
  }
  if (m.total > 0) {
    std::int64_t band = 0;
    for (int row = m.band_first_row; row <= m.band_last_row; ++row) {
      for (int col = 0; col < m.cols; ++col) band += m.at(row, col);
    }
    m.middle_share = static_cast<double>(band) / static_cast<double>(m.total);
  }
  return m;
}

}  // namespace warp
