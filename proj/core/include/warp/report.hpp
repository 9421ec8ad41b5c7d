#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "warp/metrics.hpp"
#include "warp/sweeps.hpp"

namespace warp {

/// Text fragments describing the arithmetic conventions; embedded in every
/// report so results can be interpreted without the source.
struct Conventions {
  static constexpr const char* kApIntegration =
      "trapezoid over raw PR points with recall-0 anchor at first precision";
  static constexpr const char* kMatching =
      "descending confidence; best unmatched same-class GT with IoU >= threshold; ties to lower GT index";
  static constexpr const char* kLossSign = "L = (mAP_original - mAP_after) / mAP_original * 100 (positive loss)";
  static constexpr const char* kSigma = "population std over all W*H*3 channel values, single scalar";
  static constexpr const char* kSeedPolicy = "seed = hash(run seed, image_id, level index, repeat)";
  static constexpr const char* kImageClass = "TP iff detector reports >= 1 box";
  static constexpr const char* kCompositing = "source-over alpha, footprint snapped to whole pixels";
  static constexpr const char* kHeatmapRule = "annotation counted in the cell containing its box center";
  static constexpr const char* kDeception = "slot deceived if any detection has IoU >= 0.50 with the clipped patch box";
  static constexpr const char* kAlphaBetaMean = "mean over all k images; non-applicable class contributes 0";
  static constexpr const char* kUnevaluated = "failed cells count as non-events; denominators stay at the slot count";
};

struct ReportMetadata {
  std::string detector_name;
  double conf_threshold = 0.0;
  std::uint64_t seed = 0;
  std::string patch_digest;
  int grid_rows = 25;
  int grid_cols = 25;
};

struct RobustnessReport {
  ReportMetadata metadata;
  std::int64_t images = 0;
  std::int64_t tp_count = 0;
  std::int64_t fn_count = 0;
  FlipProbabilities expected_flip;
  GammaSummary gamma;
  DeceptionMap deception_map;
  std::int64_t unevaluated_cells = 0;
};

RobustnessReport build_robustness_report(std::span<const GridSweepResult> results, ReportMetadata metadata);

std::string report_json(const RobustnessReport& report);
std::string baseline_json(const Baseline& baseline, const ReportMetadata& metadata);
Baseline parse_baseline_json(const std::string& text);
std::string global_sweep_json(std::span<const SweepPoint> points, const ReportMetadata& metadata,
                              const GlobalSweepConfig& config);
std::string local_results_json(std::span<const GridSweepResult> results);
std::vector<GridSweepResult> parse_local_results_json(const std::string& text);

/// deceived,gamma,images
std::string gamma_frequency_csv(const GammaSummary& gamma);
GammaSummary parse_gamma_frequency_csv(const std::string& csv, int attempts);
/// rows x cols matrix of counts
std::string deception_map_csv(const DeceptionMap& map);
DeceptionMap parse_deception_map_csv(const std::string& csv);
/// level_index,noise_level,map_original,map_after,loss,signed_loss,unevaluated_images
std::string sweep_points_csv(std::span<const SweepPoint> points);
std::vector<SweepPoint> parse_sweep_points_csv(const std::string& csv);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace warp
