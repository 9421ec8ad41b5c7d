#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "warp/cache.hpp"
#include "warp/dataset.hpp"
#include "warp/detector.hpp"
#include "warp/metrics.hpp"
#include "warp/perturb.hpp"

namespace warp {

/// Independent handles to the same detector, one per worker thread.
class DetectorPool {
 public:
  explicit DetectorPool(std::vector<DetectorHandle> handles);

  /// Opens `workers` handles for `descriptor` and handshakes each of them.
  static DetectorPool open(const std::string& descriptor, int workers,
                           DetectorHandle::Options options = {});

  std::size_t size() const { return handles_.size(); }
  DetectorHandle& at(std::size_t i) { return handles_.at(i); }
  const std::string& name() const { return handles_.front().name(); }
  double conf_threshold() const { return handles_.front().conf_threshold(); }
  std::uint64_t transport_calls() const;

 private:
  std::vector<DetectorHandle> handles_;
};

/// Calls fn(worker, index) for index in [0, count) across the pool's workers.
/// Each worker owns handle `worker`. Exceptions are rethrown on the caller.
void parallel_for(DetectorPool& pool, std::size_t count,
                  const std::function<void(DetectorHandle&, std::size_t)>& fn);

/// Detection on the unperturbed test set.
struct Baseline {
  std::string detector_name;
  double conf_threshold = 0.0;
  std::vector<EvalOutcome> outcomes;  // dataset order
  std::vector<std::string> failed_images;
  MapScores scores;

  std::int64_t tp_count() const;
  std::int64_t fn_count() const;
};

Baseline compute_baseline(const ImageSource& images, DetectorPool& pool, ResponseCache* cache = nullptr);

struct GlobalSweepConfig {
  double a_start = 0.0;
  double a_end = 0.4;
  double a_step = 0.001;
  std::uint64_t seed = 0;
  /// Noise realizations per (image, level); mAP_after is averaged over them.
  int repeats = 1;

  void validate() const;
  /// a_start + i * a_step for i = 0.. while <= a_end (with a 1e-9 step
  /// tolerance), snapped to 1e-12: 401 levels for the defaults.
  std::vector<double> levels() const;
};

struct SweepPoint {
  int level_index = 0;
  double noise_level = 0.0;
  double map_original = 0.0;
  double map_after = 0.0;
  PercentageLoss loss;
  /// Images whose detection failed at this level; they contribute no boxes.
  int unevaluated_images = 0;

  bool complete() const { return unevaluated_images == 0; }
};

struct SweepControl {
  /// Where progress is persisted; empty disables checkpointing.
  std::filesystem::path checkpoint;
  /// Continue from `checkpoint` if it exists. A digest mismatch throws
  /// CheckpointMismatch.
  bool resume = false;
  /// Stop after this many work units (levels, or images for the local
  /// sweep). Used to split a run across invocations.
  std::optional<std::size_t> stop_after;
  ResponseCache* cache = nullptr;
};

struct GlobalSweepRun {
  std::vector<SweepPoint> points;  // ordered by level
  bool finished = false;
  std::string config_digest;
};

GlobalSweepRun run_global_sweep(const GlobalSweepConfig& config, const ImageSource& images,
                                const Baseline& baseline, DetectorPool& pool,
                                const SweepControl& control = {});

struct LocalSweepConfig {
  GridSchedule grid;
  PatchSpec patch;
  double deception_iou = kDeceptionIou;
};

struct LocalSweepRun {
  std::vector<GridSweepResult> results;  // dataset order
  bool finished = false;
  std::string config_digest;
};

LocalSweepRun run_local_sweep(const LocalSweepConfig& config, const ImageSource& images,
                              const Baseline& baseline, DetectorPool& pool,
                              const SweepControl& control = {});

std::string global_config_digest(const GlobalSweepConfig& config, const ImageSource& images,
                                 const Baseline& baseline);
std::string local_config_digest(const LocalSweepConfig& config, const ImageSource& images,
                                const Baseline& baseline);

}  // namespace warp
