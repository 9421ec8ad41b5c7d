// Reference implementations written independently of the library code, used
// as test oracles. Deliberately simple and slow.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "warp/image.hpp"
#include "warp/types.hpp"

namespace oracle {

inline double overlap(const warp::BoundingBox& a, const warp::BoundingBox& b) {
  const double x0 = a.x_min > b.x_min ? a.x_min : b.x_min;
  const double y0 = a.y_min > b.y_min ? a.y_min : b.y_min;
  const double x1 = a.x_max < b.x_max ? a.x_max : b.x_max;
  const double y1 = a.y_max < b.y_max ? a.y_max : b.y_max;
  if (!(x1 > x0) || !(y1 > y0)) return 0.0;
  const double inter = (x1 - x0) * (y1 - y0);
  const double area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min);
  const double area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min);
  return inter / (area_a + area_b - inter);
}

/// AP for one class at one threshold: every detection gets an explicit rank
/// (count of detections that beat it), then cumulative TP/FP are tallied
/// and the PR polyline is integrated with a recall-0 anchor.
inline std::optional<double> class_ap(const std::vector<std::vector<warp::Detection>>& dets,
                                      const std::vector<std::vector<warp::GroundTruthAnnotation>>& gts, int cls,
                                      double thr) {
  int n_gt = 0;
  for (const auto& img : gts)
    for (const auto& g : img) n_gt += g.class_label == cls;
  if (n_gt == 0) return std::nullopt;

  struct D {
    double conf;
    std::size_t img, idx;
  };
  std::vector<D> all;
  for (std::size_t i = 0; i < dets.size(); ++i)
    for (std::size_t j = 0; j < dets[i].size(); ++j)
      if (dets[i][j].class_label == cls) all.push_back({dets[i][j].confidence, i, j});
  const std::size_t n = all.size();
  std::vector<D> order(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t rank = 0;
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      const bool beats = all[b].conf > all[a].conf ||
                         (all[b].conf == all[a].conf &&
                          (all[b].img < all[a].img || (all[b].img == all[a].img && all[b].idx < all[a].idx)));
      rank += beats;
    }
    order[rank] = all[a];
  }

  std::set<std::pair<std::size_t, std::size_t>> used;
  std::vector<double> recall, precision;
  int tp = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& d = order[r];
    const auto& box = dets[d.img][d.idx].box;
    std::optional<std::size_t> pick;
    double pick_iou = 0.0;
    for (std::size_t g = 0; g < gts[d.img].size(); ++g) {
      if (gts[d.img][g].class_label != cls || used.count({d.img, g})) continue;
      const double v = overlap(box, gts[d.img][g].box);
      if (v < thr) continue;
      if (!pick || v > pick_iou) {
        pick = g;
        pick_iou = v;
      }
    }
    if (pick) {
      used.insert({d.img, *pick});
      ++tp;
    }
    recall.push_back(static_cast<double>(tp) / n_gt);
    precision.push_back(static_cast<double>(tp) / static_cast<double>(r + 1));
  }
  if (n == 0) return 0.0;
  double area = recall[0] * precision[0];  // anchor (0, p1) to (r1, p1)
  for (std::size_t k = 1; k < n; ++k) area += (recall[k] - recall[k - 1]) * (precision[k] + precision[k - 1]) * 0.5;
  return area;
}

struct MapOracle {
  double map50 = 0.0;
  double map50_95 = 0.0;
};

inline MapOracle map(const std::vector<std::vector<warp::Detection>>& dets,
                     const std::vector<std::vector<warp::GroundTruthAnnotation>>& gts) {
  std::set<int> classes;
  for (const auto& img : gts)
    for (const auto& g : img) classes.insert(g.class_label);
  MapOracle out;
  if (classes.empty()) return out;
  const double thresholds[] = {0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  double total = 0.0;
  for (double t : thresholds) {
    double s = 0.0;
    for (int c : classes) s += *class_ap(dets, gts, c, t);
    const double m = s / static_cast<double>(classes.size());
    if (t == 0.50) out.map50 = m;
    total += m;
  }
  out.map50_95 = total / 10.0;
  return out;
}

/// Two-pass population standard deviation over all channel values.
inline double sigma(const warp::Image& img) {
  const auto data = img.data();
  long double mean = 0.0L;
  for (auto v : data) mean += v;
  mean /= static_cast<long double>(data.size());
  long double ss = 0.0L;
  for (auto v : data) ss += (v - mean) * (v - mean);
  return static_cast<double>(std::sqrt(ss / static_cast<long double>(data.size())));
}

/// Pixels whose centers lie in (c - s/2, c + s/2] on each axis, clipped to
/// the image. Returns the tight box around them.
inline warp::BoundingBox patch_box(double cx, double cy, int pw, int ph, int w, int h) {
  int x0 = w, y0 = h, x1 = -1, y1 = -1;
  for (int x = 0; x < w; ++x) {
    const double c = x + 0.5;
    if (c > cx - pw / 2.0 && c <= cx + pw / 2.0) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
    }
  }
  for (int y = 0; y < h; ++y) {
    const double c = y + 0.5;
    if (c > cy - ph / 2.0 && c <= cy + ph / 2.0) {
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 + 1), static_cast<double>(y1 + 1)};
}

/// Slot center ((c+0.5) W / cols, (r+0.5) H / rows).
inline std::pair<double, double> slot_center(int r, int c, int w, int h, int rows = 25, int cols = 25) {
  return {(c + 0.5) * w / cols, (r + 0.5) * h / rows};
}

/// Per-pixel source-over composite of an RGBA patch whose top-left pixel
/// lands at (left, top).
inline warp::Image composite(const warp::Image& base, const warp::RgbaImage& patch, int left, int top,
                             double brightness = 1.0) {
  warp::Image out = base;
  for (int py = 0; py < patch.height(); ++py) {
    for (int px = 0; px < patch.width(); ++px) {
      const int x = left + px, y = top + py;
      if (x < 0 || y < 0 || x >= base.width() || y >= base.height()) continue;
      const double a = patch.at(px, py, 3) / 255.0;
      for (int c = 0; c < 3; ++c) {
        const double fg = std::min(255.0, patch.at(px, py, c) * brightness);
        const double v = a * fg + (1.0 - a) * base.at(x, y, c);
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
      }
    }
  }
  return out;
}

/// Exhaustive brightest-window search; placements may hang off the image.
struct Window {
  int left, top;
  long long sum;
};
inline Window brightest(const warp::Image& img, int win) {
  Window best{0, 0, -1};
  for (int top = 1 - win; top < img.height(); ++top) {
    for (int left = 1 - win; left < img.width(); ++left) {
      long long s = 0;
      for (int y = std::max(0, top); y < std::min(img.height(), top + win); ++y)
        for (int x = std::max(0, left); x < std::min(img.width(), left + win); ++x)
          s += img.at(x, y, 0) + img.at(x, y, 1) + img.at(x, y, 2);
      if (s > best.sum) best = {left, top, s};
    }
  }
  return best;
}

/// Box remap used by mosaic/crop: scale, translate, clip to [x0,x1]x[y0,y1],
/// keep if the clipped area is at least `keep` of the mapped area.
inline std::optional<warp::BoundingBox> remap(const warp::BoundingBox& b, double s_x, double s_y, double t_x,
                                              double t_y, double x0, double y0, double x1, double y1,
                                              double keep) {
  const double mx0 = b.x_min * s_x + t_x, mx1 = b.x_max * s_x + t_x;
  const double my0 = b.y_min * s_y + t_y, my1 = b.y_max * s_y + t_y;
  const double cx0 = std::max(mx0, x0), cx1 = std::min(mx1, x1);
  const double cy0 = std::max(my0, y0), cy1 = std::min(my1, y1);
  if (cx1 <= cx0 || cy1 <= cy0) return std::nullopt;
  if ((cx1 - cx0) * (cy1 - cy0) < keep * (mx1 - mx0) * (my1 - my0)) return std::nullopt;
  return warp::BoundingBox{cx0, cy0, cx1, cy1};
}

}  // namespace oracle
