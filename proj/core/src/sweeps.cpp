#include "warp/sweeps.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "results_json.hpp"
#include "warp/digest.hpp"
#include "warp/errors.hpp"
#include "warp/rng.hpp"

namespace fs = std::filesystem;

namespace warp {
namespace {

using detail::json;

EvalOutcome run_detection(DetectorHandle& handle, const ImageRecord& record, ResponseCache* cache) {
  return cache ? cached_detect(handle, record, *cache) : handle.detect(record);
}

std::vector<std::string> image_ids(const ImageSource& images) {
  std::vector<std::string> ids;
  ids.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) ids.push_back(images.image_id(i));
  return ids;
}

std::optional<json> read_checkpoint(const SweepControl& control, const std::string& kind, const std::string& digest) {
  if (!control.resume || control.checkpoint.empty() || !fs::exists(control.checkpoint)) return std::nullopt;
  json doc;
  try {
    doc = json::parse(read_file(control.checkpoint));
  } catch (const json::exception& e) {
    throw CheckpointMismatch("checkpoint " + control.checkpoint.string() + " is unreadable: " + e.what());
  }
  if (doc.value("kind", std::string{}) != kind || doc.value("config_digest", std::string{}) != digest) {
    throw CheckpointMismatch("checkpoint " + control.checkpoint.string() +
                             " was produced by a different configuration; start a fresh run");
  }
  return doc;
}

void write_checkpoint(const SweepControl& control, const json& doc) {
  if (control.checkpoint.empty()) return;
  write_file_atomic(control.checkpoint, detail::dump(doc));
}

}  // namespace

DetectorPool::DetectorPool(std::vector<DetectorHandle> handles) : handles_(std::move(handles)) {
  if (handles_.empty()) throw ConfigError("detector pool needs at least one handle");
  for (const auto& h : handles_) {
    if (h.name() != handles_.front().name()) throw ConfigError("detector pool mixes different detectors");
  }
}

DetectorPool DetectorPool::open(const std::string& descriptor, int workers, DetectorHandle::Options options) {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  std::vector<DetectorHandle> handles;
  for (int i = 0; i < workers; ++i) {
    handles.push_back(open_detector(descriptor, options));
    handles.back().handshake();
  }
  return DetectorPool(std::move(handles));
}

std::uint64_t DetectorPool::transport_calls() const {
  std::uint64_t n = 0;
  for (const auto& h : handles_) n += h.transport_calls();
  return n;
}

void parallel_for(DetectorPool& pool, std::size_t count,
                  const std::function<void(DetectorHandle&, std::size_t)>& fn) {
  const std::size_t workers = std::min(pool.size(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(pool.at(0), i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        for (;;) {
          if (failed) return;
          const std::size_t i = next++;
          if (i >= count) return;
          try {
            fn(pool.at(w), i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            failed = true;
            return;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

std::int64_t Baseline::tp_count() const {
  return std::count_if(outcomes.begin(), outcomes.end(),
                       [](const EvalOutcome& o) { return o.original_class == ImageClass::kTruePositive; });
}

std::int64_t Baseline::fn_count() const { return static_cast<std::int64_t>(outcomes.size()) - tp_count(); }

Baseline compute_baseline(const ImageSource& images, DetectorPool& pool, ResponseCache* cache) {
  Baseline b;
  b.detector_name = pool.name();
  b.conf_threshold = pool.conf_threshold();
  const std::size_t n = images.size();
  b.outcomes.resize(n);
  std::vector<std::vector<GroundTruthAnnotation>> gts(n);
  std::vector<char> failed(n, 0);
  parallel_for(pool, n, [&](DetectorHandle& handle, std::size_t i) {
    const ImageRecord record = images.load(i);
    gts[i] = record.annotations;
    try {
      b.outcomes[i] = run_detection(handle, record, cache);
    } catch (const DetectionFailed& e) {
      spdlog::error("baseline: {}", e.what());
      b.outcomes[i] = make_outcome(record.image_id, {});
      failed[i] = 1;
    }
  });
  std::vector<std::vector<Detection>> dets(n);
  for (std::size_t i = 0; i < n; ++i) {
    dets[i] = b.outcomes[i].detections;
    if (failed[i]) b.failed_images.push_back(b.outcomes[i].image_id);
  }
  b.scores = map_scores(dets, gts);
  return b;
}

void GlobalSweepConfig::validate() const {
  if (!(a_step > 0.0)) throw ConfigError("a_step must be > 0");
  if (!(a_start >= 0.0 && a_end <= 1.0)) throw ConfigError("noise levels must lie in [0,1]");
  if (a_start > a_end) throw ConfigError("a_start must not exceed a_end");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
}

std::vector<double> GlobalSweepConfig::levels() const {
  validate();
  const auto steps = static_cast<std::int64_t>(std::floor((a_end - a_start) / a_step + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(steps + 1));
  // Snapped to 1e-12 so that e.g. level 9 of step 0.001 is 0.009, not 0.009000000000000001.
  for (std::int64_t i = 0; i <= steps; ++i) {
    out.push_back(std::round((a_start + static_cast<double>(i) * a_step) * 1e12) / 1e12);
  }
  return out;
}

std::string global_config_digest(const GlobalSweepConfig& config, const ImageSource& images,
                                 const Baseline& baseline) {
  const json doc{{"kind", "global"},
                 {"a_start", config.a_start},
                 {"a_end", config.a_end},
                 {"a_step", config.a_step},
                 {"seed", config.seed},
                 {"repeats", config.repeats},
                 {"detector", baseline.detector_name},
                 {"map_original", baseline.scores.map50_95},
                 {"images", image_ids(images)}};
  return sha256_hex(doc.dump());
}

std::string local_config_digest(const LocalSweepConfig& config, const ImageSource& images,
                                const Baseline& baseline) {
  json classes = json::array();
  for (const auto& o : baseline.outcomes) classes.push_back(std::string(to_string(o.original_class)));
  const json doc{{"kind", "local"},
                 {"rows", config.grid.rows},
                 {"cols", config.grid.cols},
                 {"patch", image_digest(config.patch.pixels)},
                 {"brightness", config.patch.brightness},
                 {"deception_iou", config.deception_iou},
                 {"detector", baseline.detector_name},
                 {"images", image_ids(images)},
                 {"baseline", std::move(classes)}};
  return sha256_hex(doc.dump());
}

GlobalSweepRun run_global_sweep(const GlobalSweepConfig& config, const ImageSource& images, const Baseline& baseline,
                                DetectorPool& pool, const SweepControl& control) {
  const auto levels = config.levels();
  GlobalSweepRun run;
  run.config_digest = global_config_digest(config, images, baseline);

  std::vector<std::optional<SweepPoint>> points(levels.size());
  std::vector<bool> completed(levels.size(), false);
  if (auto doc = read_checkpoint(control, "global", run.config_digest)) {
    completed = decode_bitmap(doc->at("completed").get<std::string>(), levels.size());
    for (const auto& j : doc->at("points")) {
      auto p = detail::sweep_point_from_json(j);
      points.at(static_cast<std::size_t>(p.level_index)) = p;
    }
    spdlog::info("resuming global sweep: {} of {} levels done",
                 std::count(completed.begin(), completed.end(), true), levels.size());
  }

  const std::size_t n = images.size();
  const double map_original = baseline.scores.map50_95;
  std::size_t processed = 0;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    if (completed[li]) continue;
    if (control.stop_after && processed >= *control.stop_after) break;
    const double a = levels[li];

    std::vector<std::vector<std::vector<Detection>>> dets(
        static_cast<std::size_t>(config.repeats), std::vector<std::vector<Detection>>(n));
    std::vector<std::vector<GroundTruthAnnotation>> gts(n);
    std::vector<char> failed(n, 0);
    parallel_for(pool, n, [&](DetectorHandle& handle, std::size_t i) {
      const ImageRecord record = images.load(i);
      gts[i] = record.annotations;
      for (int rep = 0; rep < config.repeats; ++rep) {
        const NoiseOverlayParams params{a, derive_seed(config.seed, record.image_id, li, static_cast<std::uint64_t>(rep))};
        try {
          dets[static_cast<std::size_t>(rep)][i] = run_detection(handle, global_overlay(record, params), control.cache).detections;
        } catch (const DetectionFailed& e) {
          spdlog::error("global sweep a={}: {}", a, e.what());
          failed[i] = 1;
        }
      }
    });

    double map_after = 0.0;
    for (const auto& rep : dets) map_after += map_scores(rep, gts).map50_95;
    map_after /= config.repeats;

    SweepPoint p;
    p.level_index = static_cast<int>(li);
    p.noise_level = a;
    p.map_original = map_original;
    p.map_after = map_after;
    p.loss = map_percentage_loss(map_original, map_after);
    p.unevaluated_images = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
    points[li] = p;
    completed[li] = true;
    ++processed;

    json saved = json::array();
    for (const auto& q : points) {
      if (q) saved.push_back(detail::sweep_point_to_json(*q));
    }
    write_checkpoint(control, json{{"kind", "global"},
                                   {"config_digest", run.config_digest},
                                   {"levels", levels.size()},
                                   {"completed", encode_bitmap(completed)},
                                   {"points", std::move(saved)}});
  }

  for (const auto& p : points) {
    if (p) run.points.push_back(*p);
  }
  run.finished = run.points.size() == levels.size();
  return run;
}

LocalSweepRun run_local_sweep(const LocalSweepConfig& config, const ImageSource& images, const Baseline& baseline,
                              DetectorPool& pool, const SweepControl& control) {
  try {
    config.patch.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid patch: ") + e.what());
  }
  if (config.grid.rows < 1 || config.grid.cols < 1) throw ConfigError("grid must be at least 1x1");

  std::unordered_map<std::string, ImageClass> baseline_class;
  for (const auto& o : baseline.outcomes) baseline_class.emplace(o.image_id, o.original_class);

  LocalSweepRun run;
  run.config_digest = local_config_digest(config, images, baseline);
  const std::size_t n = images.size();
  const auto slots_per_image = static_cast<std::size_t>(config.grid.slot_count());

  std::vector<std::optional<GridSweepResult>> results(n);
  std::vector<bool> completed(n * slots_per_image, false);
  if (auto doc = read_checkpoint(control, "local", run.config_digest)) {
    completed = decode_bitmap(doc->at("completed").get<std::string>(), completed.size());
    for (const auto& j : doc->at("results")) {
      auto r = detail::grid_result_from_json(j);
      for (std::size_t i = 0; i < n; ++i) {
        if (images.image_id(i) == r.image_id) results[i] = std::move(r);
      }
    }
    spdlog::info("resuming local sweep from {}", control.checkpoint.string());
  }

  const int pw = config.patch.pixels.width();
  const int ph = config.patch.pixels.height();
  std::size_t processed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) continue;
    if (control.stop_after && processed >= *control.stop_after) break;
    const ImageRecord record = images.load(i);
    const auto found = baseline_class.find(record.image_id);
    if (found == baseline_class.end()) {
      throw ConfigError("baseline has no outcome for image " + record.image_id + "; rerun the baseline");
    }

    GridSweepResult result;
    result.image_id = record.image_id;
    result.original_class = found->second;
    result.grid = config.grid;
    result.slots.resize(slots_per_image);
    const auto slots = enumerate_slots(record.pixels.width(), record.pixels.height(), config.grid, pw, ph);

    parallel_for(pool, slots.size(), [&](DetectorHandle& handle, std::size_t s) {
      ImageRecord perturbed{record.image_id, record.pixels, record.annotations, record.source};
      composite_patch(perturbed.pixels, config.patch, slots[s].placement.left, slots[s].placement.top);
      SlotRecord& rec = result.slots[s];
      try {
        const EvalOutcome outcome = run_detection(handle, perturbed, control.cache);
        rec.flipped = outcome.original_class != result.original_class;
        rec.deceived = slot_deceived(outcome.detections, slots[s].placement.box, config.deception_iou);
      } catch (const DetectionFailed& e) {
        spdlog::error("local sweep slot ({},{}): {}", slots[s].index.row, slots[s].index.col, e.what());
        rec = {false, false, false};
      }
    });

    results[i] = std::move(result);
    for (std::size_t s = 0; s < slots_per_image; ++s) completed[i * slots_per_image + s] = true;
    ++processed;

    json saved = json::array();
    for (const auto& r : results) {
      if (r) saved.push_back(detail::grid_result_to_json(*r));
    }
    write_checkpoint(control, json{{"kind", "local"},
                                   {"config_digest", run.config_digest},
                                   {"images", n},
                                   {"slots_per_image", slots_per_image},
                                   {"completed", encode_bitmap(completed)},
                                   {"results", std::move(saved)}});
  }

  for (auto& r : results) {
    if (r) run.results.push_back(std::move(*r));
  }
  run.finished = run.results.size() == n;
  return run;
}

}  // namespace warp
