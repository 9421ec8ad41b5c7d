#include "cli/run_config.hpp"

#include <json.hpp>

#include <set>

#include "warp/checkpoint.hpp"
#include "warp/dataset.hpp"
#include "warp/errors.hpp"

namespace warp::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

}  // namespace

DetectorHandle::Options RunConfig::detector_options() const {
  DetectorHandle::Options o;
  o.timeout = std::chrono::milliseconds(static_cast<long long>(detector_timeout_s * 1000.0));
  o.retries = retries;
  o.payload = payload;
  return o;
}

RunConfig parse_run_config(const std::string& json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(doc,
                 {"dataset", "detector", "detector_timeout_s", "retries", "payload", "workers", "seed", "out",
                  "global", "local", "augment", "heatmap"},
                 "config");
  RunConfig c;
  c.dataset = resolve(base_dir, get_or<std::string>(doc, "dataset", "", "config"));
  c.detector = get_or<std::string>(doc, "detector", "", "config");
  if (c.detector.starts_with("scripted:"))
    c.detector = "scripted:" + resolve(base_dir, c.detector.substr(9)).string();
  c.detector_timeout_s = get_or(doc, "detector_timeout_s", c.detector_timeout_s, "config");
  c.retries = get_or(doc, "retries", c.retries, "config");
  const auto payload = get_or<std::string>(doc, "payload", "file", "config");
  if (payload == "file") c.payload = PayloadMode::kSharedFile;
  else if (payload == "base64") c.payload = PayloadMode::kInlineBase64;
  else throw ConfigError("payload must be \"file\" or \"base64\"");
  c.workers = get_or(doc, "workers", c.workers, "config");
  c.seed = get_or(doc, "seed", c.seed, "config");
  c.out = resolve(base_dir, get_or<std::string>(doc, "out", "", "config"));

  if (doc.contains("global")) {
    const json& g = doc["global"];
    reject_unknown(g, {"a_start", "a_end", "a_step", "repeats"}, "global");
    c.global.a_start = get_or(g, "a_start", c.global.a_start, "global");
    c.global.a_end = get_or(g, "a_end", c.global.a_end, "global");
    c.global.a_step = get_or(g, "a_step", c.global.a_step, "global");
    c.global.repeats = get_or(g, "repeats", c.global.repeats, "global");
  }
  if (doc.contains("local")) {
    const json& l = doc["local"];
    reject_unknown(l, {"grid_rows", "grid_cols", "patch", "brightness", "deception_iou"}, "local");
    c.local.grid.rows = get_or(l, "grid_rows", c.local.grid.rows, "local");
    c.local.grid.cols = get_or(l, "grid_cols", c.local.grid.cols, "local");
    c.local.patch = resolve(base_dir, get_or<std::string>(l, "patch", "", "local"));
    c.local.brightness = get_or(l, "brightness", c.local.brightness, "local");
    c.local.deception_iou = get_or(l, "deception_iou", c.local.deception_iou, "local");
  }
  if (doc.contains("augment")) {
    const json& a = doc["augment"];
    reject_unknown(a, {"variant", "count", "noise_range", "zone", "target", "min_survival"}, "augment");
    c.augment.variant = augment_variant_from_string(get_or<std::string>(a, "variant", "gaussian_overlay", "augment"));
    if (a.contains("count")) c.augment.count = get_or(a, "count", 0, "augment");
    if (a.contains("noise_range")) {
      const auto r = get_or<std::vector<double>>(a, "noise_range", {}, "augment");
      if (r.size() != 2) throw ConfigError("augment.noise_range must have two entries");
      c.augment.noise_min = r[0];
      c.augment.noise_max = r[1];
    }
    c.augment.zone = patch_zone_from_string(get_or<std::string>(a, "zone", "middle_horizontal", "augment"));
    if (a.contains("target")) {
      const auto t = get_or<std::vector<int>>(a, "target", {}, "augment");
      if (t.size() != 2) throw ConfigError("augment.target must be [width, height]");
      c.augment.target_width = t[0];
      c.augment.target_height = t[1];
    }
    c.augment.min_survival = get_or(a, "min_survival", c.augment.min_survival, "augment");
  }
  if (doc.contains("heatmap")) {
    const json& h = doc["heatmap"];
    reject_unknown(h, {"rows", "cols"}, "heatmap");
    c.heatmap_rows = get_or(h, "rows", c.heatmap_rows, "heatmap");
    c.heatmap_cols = get_or(h, "cols", c.heatmap_cols, "heatmap");
  }

  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (c.retries < 0) throw ConfigError("retries must be >= 0");
  if (!(c.detector_timeout_s > 0.0)) throw ConfigError("detector_timeout_s must be > 0");
  c.global.validate();
  if (c.local.grid.rows < 1 || c.local.grid.cols < 1) throw ConfigError("local grid must be at least 1x1");
  if (c.local.brightness < 0.0) throw ConfigError("local.brightness must be >= 0");
  if (!(c.local.deception_iou > 0.0 && c.local.deception_iou <= 1.0)) throw ConfigError("local.deception_iou must be in (0,1]");
  if (!(0.0 <= c.augment.noise_min && c.augment.noise_min <= c.augment.noise_max && c.augment.noise_max <= 1.0)) {
    throw ConfigError("augment.noise_range must satisfy 0 <= min <= max <= 1");
  }
  if (c.augment.count && *c.augment.count < 1) throw ConfigError("augment.count must be >= 1");
  if (c.augment.target_width < 1 || c.augment.target_height < 1) throw ConfigError("augment.target must be positive");
  if (!(c.augment.min_survival >= 0.0 && c.augment.min_survival <= 1.0)) throw ConfigError("augment.min_survival must be in [0,1]");
  if (c.heatmap_rows < 1 || c.heatmap_cols < 1) throw ConfigError("heatmap grid must be at least 1x1");
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  return parse_run_config(read_file(path), fs::absolute(path).parent_path());
}

void apply_overrides(RunConfig& config, const Overrides& overrides, const char* env_detector) {
  if (config.detector.empty() && env_detector && *env_detector) config.detector = env_detector;
  if (overrides.detector) config.detector = *overrides.detector;
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.out) config.out = fs::absolute(*overrides.out).lexically_normal();
  if (overrides.variant) config.augment.variant = augment_variant_from_string(*overrides.variant);
  if (overrides.count) {
    if (*overrides.count < 1) throw ConfigError("--count must be >= 1");
    config.augment.count = overrides.count;
  }
}

std::string run_config_json(const RunConfig& c) {
  json doc{{"dataset", c.dataset.string()},
           {"detector", c.detector},
           {"detector_timeout_s", c.detector_timeout_s},
           {"retries", c.retries},
           {"payload", c.payload == PayloadMode::kSharedFile ? "file" : "base64"},
           {"workers", c.workers},
           {"seed", c.seed},
           {"out", c.out.string()},
           {"global", {{"a_start", c.global.a_start}, {"a_end", c.global.a_end}, {"a_step", c.global.a_step},
                       {"repeats", c.global.repeats}}},
           {"local", {{"grid_rows", c.local.grid.rows}, {"grid_cols", c.local.grid.cols},
                      {"patch", c.local.patch.string()}, {"brightness", c.local.brightness},
                      {"deception_iou", c.local.deception_iou}}},
           {"augment", {{"variant", std::string(to_string(c.augment.variant))},
                        {"noise_range", {c.augment.noise_min, c.augment.noise_max}},
                        {"zone", std::string(to_string(c.augment.zone))},
                        {"target", {c.augment.target_width, c.augment.target_height}},
                        {"min_survival", c.augment.min_survival}}},
           {"heatmap", {{"rows", c.heatmap_rows}, {"cols", c.heatmap_cols}}}};
  if (c.augment.count) doc["augment"]["count"] = *c.augment.count;
  return doc.dump(2) + "\n";
}

PatchSpec load_patch(const RunConfig& config) {
  PatchSpec spec;
  spec.pixels = config.local.patch.empty() ? default_cloud_patch(25) : load_rgba(config.local.patch);
  spec.brightness = config.local.brightness;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("patch is unusable: ") + e.what());
  }
  return spec;
}

}  // namespace warp::cli
