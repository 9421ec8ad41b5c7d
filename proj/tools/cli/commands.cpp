#include "cli/commands.hpp"

#include <spdlog/spdlog.h>

#include <json.hpp>

#include <cstdio>
#include <set>

#include "warp/checkpoint.hpp"
#include "warp/dataset.hpp"
#include "warp/digest.hpp"
#include "warp/errors.hpp"
#include "warp/report.hpp"
#include "warp/rng.hpp"

namespace warp::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr const char* kBaselineFile = "baseline.json";
constexpr const char* kLocalResultsFile = "local_results.json";
constexpr const char* kGlobalSweepFile = "global_sweep.json";

void prepare_out(const RunConfig& config) {
  if (config.out.empty()) throw ConfigError("no output directory: pass --out or set \"out\" in the config");
  std::error_code ec;
  fs::create_directories(config.out, ec);
  if (ec) throw ConfigError("cannot create output directory " + config.out.string() + ": " + ec.message());
  write_file_atomic(config.out / "config.json", run_config_json(config));
}

DatasetManifest load_dataset(const RunConfig& config) {
  if (config.dataset.empty()) throw ConfigError("config has no \"dataset\"");
  return load_manifest(config.dataset);
}

DetectorPool open_pool(const RunConfig& config) {
  if (config.detector.empty()) {
    throw ConfigError(std::string("no detector: pass --detector, set \"detector\" in the config or export ") +
                      kDetectorEnvVar);
  }
  return DetectorPool::open(config.detector, config.workers, config.detector_options());
}

/// Response cache persisted next to the run outputs.
class PersistentCache {
 public:
  explicit PersistentCache(const fs::path& out) : path_(out / "cache.jsonl") {
    if (fs::exists(path_)) {
      const auto skipped = cache_.load(path_);
      if (skipped) spdlog::warn("{}: skipped {} corrupt cache lines", path_.string(), skipped);
    }
  }
  ~PersistentCache() {
    try {
      cache_.save(path_);
    } catch (const std::exception& e) {
      spdlog::warn("could not save response cache: {}", e.what());
    }
  }
  ResponseCache* get() { return &cache_; }

 private:
  fs::path path_;
  ResponseCache cache_;
};

ReportMetadata metadata_for(const RunConfig& config, const std::string& detector_name, double conf_threshold) {
  ReportMetadata m;
  m.detector_name = detector_name;
  m.conf_threshold = conf_threshold;
  m.seed = config.seed;
  m.patch_digest = image_digest(load_patch(config).pixels);
  m.grid_rows = config.local.grid.rows;
  m.grid_cols = config.local.grid.cols;
  return m;
}

/// Loads the stored baseline and checks it belongs to this dataset and detector.
Baseline require_baseline(const RunConfig& config, const ImageSource& images, const DetectorPool& pool) {
  const fs::path path = config.out / kBaselineFile;
  if (!fs::exists(path)) {
    throw ConfigError("no baseline in " + config.out.string() + "; run `warp baseline` with the same --out first");
  }
  Baseline b = parse_baseline_json(read_file(path));
  if (b.detector_name != pool.name()) {
    throw ConfigError("baseline in " + path.string() + " was produced by detector '" + b.detector_name +
                      "', not '" + pool.name() + "'; rerun `warp baseline`");
  }
  bool same = b.outcomes.size() == images.size();
  for (std::size_t i = 0; same && i < images.size(); ++i) same = b.outcomes[i].image_id == images.image_id(i);
  if (!same) throw ConfigError("baseline in " + path.string() + " covers a different image set; rerun `warp baseline`");
  if (!b.failed_images.empty()) {
    spdlog::warn("baseline has {} images whose detection failed; they are classed FN", b.failed_images.size());
  }
  return b;
}

SweepControl control_for(const RunConfig& config, const char* name, const SweepFlags& flags, ResponseCache* cache) {
  fs::create_directories(config.out / "checkpoints");
  SweepControl c;
  c.checkpoint = config.out / "checkpoints" / (std::string(name) + ".json");
  c.resume = flags.resume;
  c.stop_after = flags.stop_after;
  c.cache = cache;
  if (!flags.resume && fs::exists(c.checkpoint)) fs::remove(c.checkpoint);
  return c;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

}  // namespace

void cmd_baseline(const RunConfig& config) {
  prepare_out(config);
  ManifestImageSource images(load_dataset(config));
  const auto heatmap = annotation_heatmap(images.manifest(), config.heatmap_rows, config.heatmap_cols);
  write_file_atomic(config.out / "annotation_heatmap.csv", heatmap_csv(heatmap));
  write_file_atomic(config.out / "annotation_heatmap.json", heatmap_json(heatmap));

  DetectorPool pool = open_pool(config);
  PersistentCache cache(config.out);
  const Baseline b = compute_baseline(images, pool, cache.get());
  write_file_atomic(config.out / kBaselineFile,
                    baseline_json(b, metadata_for(config, b.detector_name, b.conf_threshold)));
  spdlog::info("baseline: {} images, TP={} FN={}, mAP50={} mAP50-95={}", images.size(), b.tp_count(), b.fn_count(),
               b.scores.map50, b.scores.map50_95);
}

bool cmd_global_sweep(const RunConfig& config, const SweepFlags& flags) {
  prepare_out(config);
  ManifestImageSource images(load_dataset(config));
  DetectorPool pool = open_pool(config);
  const Baseline baseline = require_baseline(config, images, pool);
  PersistentCache cache(config.out);
  const auto control = control_for(config, "global", flags, cache.get());
  const GlobalSweepRun run = run_global_sweep(config.global, images, baseline, pool, control);
  if (!run.finished) {
    spdlog::info("global sweep stopped after {} levels; rerun with --resume to continue", run.points.size());
    return false;
  }
  const auto meta = metadata_for(config, baseline.detector_name, baseline.conf_threshold);
  write_file_atomic(config.out / "global_sweep.csv", sweep_points_csv(run.points));
  write_file_atomic(config.out / kGlobalSweepFile, global_sweep_json(run.points, meta, config.global));
  int failed_levels = 0;
  for (const auto& p : run.points) failed_levels += p.complete() ? 0 : 1;
  if (failed_levels) spdlog::warn("{} levels had images whose detection failed", failed_levels);
  spdlog::info("global sweep: {} levels written", run.points.size());
  return true;
}

bool cmd_local_sweep(const RunConfig& config, const SweepFlags& flags) {
  prepare_out(config);
  ManifestImageSource images(load_dataset(config));
  DetectorPool pool = open_pool(config);
  const Baseline baseline = require_baseline(config, images, pool);
  PersistentCache cache(config.out);
  const auto control = control_for(config, "local", flags, cache.get());
  const LocalSweepConfig local{config.local.grid, load_patch(config), config.local.deception_iou};
  const LocalSweepRun run = run_local_sweep(local, images, baseline, pool, control);
  if (!run.finished) {
    spdlog::info("local sweep stopped after {} images; rerun with --resume to continue", run.results.size());
    return false;
  }
  write_file_atomic(config.out / kLocalResultsFile, local_results_json(run.results));
  const auto report =
      build_robustness_report(run.results, metadata_for(config, baseline.detector_name, baseline.conf_threshold));
  write_file_atomic(config.out / "local_sweep.json", report_json(report));
  write_file_atomic(config.out / "gamma_frequency.csv", gamma_frequency_csv(report.gamma));
  write_file_atomic(config.out / "deception_map.csv", deception_map_csv(report.deception_map));
  spdlog::info("local sweep: E[alpha]={} E[beta]={} E[gamma]={}", report.expected_flip.alpha,
               report.expected_flip.beta, report.gamma.expected);
  return true;
}

void cmd_augment(const RunConfig& config) {
  prepare_out(config);
  const DatasetManifest source = load_dataset(config);
  ManifestImageSource images(source);
  if (images.size() == 0) throw DataError("dataset has no images to augment");
  const AugmentSection& a = config.augment;
  const std::string variant(to_string(a.variant));
  const fs::path dir = config.out / "augment" / variant;
  fs::create_directories(dir / "images");

  std::vector<AugmentedRecord> records;
  const int count = a.count.value_or(static_cast<int>(images.size()));
  const PatchSpec patch = a.variant == AugmentVariant::kCloudPatch ? load_patch(config) : PatchSpec{};
  for (int i = 0; i < count; ++i) {
    const std::uint64_t seed = derive_seed(config.seed, "augment:" + variant, static_cast<std::uint64_t>(i));
    const std::size_t src = static_cast<std::size_t>(i) % images.size();
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "_%05d", i);
    switch (a.variant) {
      case AugmentVariant::kGaussianOverlay:
        records.push_back(augment_gaussian(images.load(src), a.noise_min, a.noise_max, seed));
        records.back().record.image_id = variant + suffix;
        break;
      case AugmentVariant::kCloudPatch:
        records.push_back(augment_cloud_patch(images.load(src), a.zone, patch, config.local.grid, seed));
        records.back().record.image_id = variant + suffix;
        break;
      case AugmentVariant::kMosaic: {
        Rng pick(seed);
        std::vector<ImageRecord> four;
        for (int k = 0; k < 4; ++k) {
          four.push_back(images.load(static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(images.size()) - 1))));
        }
        records.push_back(augment_mosaic(four, a.target_width, a.target_height, mix64(seed), a.min_survival));
        records.back().record.image_id = variant + suffix;
        break;
      }
      case AugmentVariant::kCrop2x2:
        if (static_cast<std::size_t>(i) >= images.size()) break;
        for (auto& r : augment_crop2x2(images.load(src), a.target_width, a.target_height, a.min_survival)) {
          records.push_back(std::move(r));
        }
        break;
    }
  }

  DatasetManifest out;
  out.name = source.name + "-" + variant;
  out.split = source.split;
  out.classes = source.classes;
  out.root = dir;
  std::string provenance;
  for (const auto& r : records) {
    const fs::path file = fs::path("images") / (r.record.image_id + ".png");
    save_png(r.record.pixels, dir / file);
    out.images.push_back({r.record.image_id, file, r.record.pixels.width(), r.record.pixels.height(), variant});
    for (const auto& ann : r.record.annotations) out.annotations.push_back({r.record.image_id, ann.box, ann.class_label});
    json line = json::parse(provenance_json(r.provenance));
    line["image_id"] = r.record.image_id;
    provenance += line.dump() + "\n";
  }
  save_manifest(out, dir / "manifest.json");
  write_file_atomic(dir / "provenance.jsonl", provenance);
  load_manifest(dir / "manifest.json");  // the emitted dataset must re-validate
  spdlog::info("augment {}: {} images written to {}", variant, records.size(), dir.string());
}

std::string render_summary(const fs::path& run_dir, const RunConfig& config) {
  const fs::path baseline_path = run_dir / kBaselineFile;
  if (!fs::exists(baseline_path)) {
    throw DataError("missing artifact " + baseline_path.string() + "; run `warp baseline` first");
  }
  const Baseline b = parse_baseline_json(read_file(baseline_path));
  const auto meta = metadata_for(config, b.detector_name, b.conf_threshold);

  std::string md = "# Robustness run summary\n\n";
  md += "## Run\n\n";
  md += "- detector: " + meta.detector_name + "\n";
  md += "- detector confidence threshold: " + format_double(meta.conf_threshold) + "\n";
  md += "- seed: " + std::to_string(meta.seed) + "\n";
  md += "- patch digest: " + meta.patch_digest + "\n";
  md += "- grid: " + std::to_string(meta.grid_rows) + "x" + std::to_string(meta.grid_cols) + "\n\n";
  md += "## Conventions\n\n";
  for (const char* c : {Conventions::kApIntegration, Conventions::kMatching, Conventions::kLossSign,
                        Conventions::kSigma, Conventions::kSeedPolicy, Conventions::kImageClass,
                        Conventions::kCompositing, Conventions::kDeception, Conventions::kAlphaBetaMean,
                        Conventions::kUnevaluated}) {
    md += std::string("- ") + c + "\n";
  }
  md += "\n## Baseline\n\n";
  md += "| images | TP | FN | mAP50 | mAP50-95 | failed |\n|---|---|---|---|---|---|\n";
  md += "| " + std::to_string(b.outcomes.size()) + " | " + std::to_string(b.tp_count()) + " | " +
        std::to_string(b.fn_count()) + " | " + format_double(b.scores.map50) + " | " +
        format_double(b.scores.map50_95) + " | " + std::to_string(b.failed_images.size()) + " |\n";

  const fs::path global_csv = run_dir / "global_sweep.csv";
  if (fs::exists(global_csv)) {
    const auto points = parse_sweep_points_csv(read_file(global_csv));
    md += "\n## Global noise sweep\n\n";
    if (points.empty()) {
      md += "No levels recorded.\n";
    } else {
      const auto worst = std::max_element(points.begin(), points.end(), [](const SweepPoint& x, const SweepPoint& y) {
        return x.loss.loss.value_or(-1e300) < y.loss.loss.value_or(-1e300);
      });
      int unevaluated = 0;
      for (const auto& p : points) unevaluated += p.unevaluated_images;
      md += "- levels: " + std::to_string(points.size()) + " (a = " + format_double(points.front().noise_level) +
            " .. " + format_double(points.back().noise_level) + ")\n";
      md += "- mAP50-95 original: " + format_double(points.front().map_original) + "\n";
      md += "- loss at final level: " + fmt_opt(points.back().loss.loss) + " %\n";
      md += "- largest loss: " + fmt_opt(worst->loss.loss) + " % at a = " + format_double(worst->noise_level) + "\n";
      if (unevaluated) md += "- WARNING: " + std::to_string(unevaluated) + " image evaluations failed across levels\n";
    }
  }

  const fs::path local_path = run_dir / kLocalResultsFile;
  if (fs::exists(local_path)) {
    const auto results = parse_local_results_json(read_file(local_path));
    const auto r = build_robustness_report(results, meta);
    md += "\n## Local patch sweep\n\n";
    md += "| images | TP | FN | E[alpha] | E[beta] | E[gamma] |\n|---|---|---|---|---|---|\n";
    md += "| " + std::to_string(r.images) + " | " + std::to_string(r.tp_count) + " | " + std::to_string(r.fn_count) +
          " | " + format_double(r.expected_flip.alpha) + " | " + format_double(r.expected_flip.beta) + " | " +
          format_double(r.gamma.expected) + " |\n\n";
    md += "Deception frequency (attempts per image: " + std::to_string(r.gamma.attempts) + ")\n\n";
    md += "| gamma | images |\n|---|---|\n";
    for (const auto& [d, n] : r.gamma.frequency) {
      md += "| " + format_double(static_cast<double>(d) / r.gamma.attempts) + " | " + std::to_string(n) + " |\n";
    }
    md += "\n- deceptions in total: " + std::to_string(r.deception_map.total) + "\n";
    md += "- middle-horizontal band rows " + std::to_string(r.deception_map.band_first_row) + "-" +
          std::to_string(r.deception_map.band_last_row) + " share: " + fmt_opt(r.deception_map.middle_share) + "\n";
    if (r.unevaluated_cells) {
      md += "- WARNING: " + std::to_string(r.unevaluated_cells) + " unevaluated cells (detector failures)\n";
    } else {
      md += "- unevaluated cells: 0\n";
    }
  }
  return md;
}

void cmd_report(const RunConfig& config) {
  if (config.out.empty()) throw ConfigError("no run directory: pass --out");
  if (!fs::is_directory(config.out)) throw DataError("run directory not found: " + config.out.string());
  write_file_atomic(config.out / "summary.md", render_summary(config.out, config));
  spdlog::info("wrote {}", (config.out / "summary.md").string());
}

}  // namespace warp::cli
