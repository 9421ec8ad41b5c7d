#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "warp/augment.hpp"
#include "warp/detector.hpp"
#include "warp/perturb.hpp"
#include "warp/sweeps.hpp"

namespace warp::cli {

struct LocalSection {
  GridSchedule grid;
  std::filesystem::path patch;  // empty: built-in cloud raster
  double brightness = 1.0;
  double deception_iou = kDeceptionIou;
};

struct AugmentSection {
  AugmentVariant variant = AugmentVariant::kGaussianOverlay;
  std::optional<int> count;  // default: one per source image
  double noise_min = 0.1;
  double noise_max = 0.4;
  PatchZone zone = PatchZone::kMiddleHorizontal;
  int target_width = 640;
  int target_height = 640;
  double min_survival = kMinSurvival;
};

/// Everything a run needs, with relative paths already resolved against the
/// config file's directory.
struct RunConfig {
  std::filesystem::path dataset;
  std::string detector;
  double detector_timeout_s = 30.0;
  int retries = 2;
  PayloadMode payload = PayloadMode::kSharedFile;
  int workers = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  GlobalSweepConfig global;
  LocalSection local;
  AugmentSection augment;
  int heatmap_rows = 25;
  int heatmap_cols = 25;

  DetectorHandle::Options detector_options() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> detector;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> variant;
  std::optional<int> count;
};

/// Throws ConfigError on unknown keys, wrong types or out-of-range values.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Detector precedence: environment < config file < flag.
void apply_overrides(RunConfig& config, const Overrides& overrides, const char* env_detector);

/// Canonical JSON of the resolved configuration (absolute paths).
std::string run_config_json(const RunConfig& config);

PatchSpec load_patch(const RunConfig& config);

}  // namespace warp::cli
