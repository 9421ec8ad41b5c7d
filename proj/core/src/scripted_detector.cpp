#include "warp/scripted_detector.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "json_io.hpp"
#include "warp/errors.hpp"

namespace warp {
namespace {

using detail::json;

Detection detection_from_rule(const json& j) {
  Detection d;
  d.box = detail::box_from_json(j.at("box"));
  d.confidence = j.value("confidence", 0.9);
  d.class_label = j.value("class", 1);
  validate_detection(d);
  return d;
}

json detection_to_rule(const Detection& d) {
  return {{"box", detail::box_to_json(d.box)}, {"confidence", d.confidence}, {"class", d.class_label}};
}

}  // namespace

Script parse_script(const std::string& json_text) {
  Script s;
  try {
    const json doc = json::parse(json_text);
    s.name = doc.value("name", std::string("scripted"));
    s.conf_threshold = doc.value("conf_threshold", 0.0);
    for (const auto& r : doc.at("rules")) {
      const std::string kind = r.at("kind");
      if (kind == "constant") {
        s.rules.emplace_back(ConstantRule{detection_from_rule(r)});
      } else if (kind == "region_trigger") {
        RegionTriggerRule rule;
        const auto& p = r.at("probe");
        rule.probe = {p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>(), p.at(3).get<int>()};
        rule.threshold = r.at("threshold");
        const std::string direction = r.value("direction", std::string("above"));
        if (direction != "above" && direction != "below") {
          throw ConfigError("region_trigger direction must be \"above\" or \"below\"");
        }
        rule.fire_above = direction == "above";
        rule.detection = detection_from_rule(r);
        s.rules.emplace_back(rule);
      } else if (kind == "patch_chaser") {
        PatchChaserRule rule;
        rule.window = r.value("window", 25);
        rule.min_intensity = r.value("min_intensity", 1);
        rule.confidence = r.value("confidence", 0.9);
        rule.class_label = r.value("class", 1);
        if (rule.window < 1) throw ConfigError("patch_chaser window must be >= 1");
        s.rules.emplace_back(rule);
      } else {
        throw ConfigError("unknown scripted rule kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid detector script: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid detector script: ") + e.what());
  }
  return s;
}

Script load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("detector script not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_script(ss.str());
}

std::string script_to_json(const Script& script) {
  json rules = json::array();
  for (const auto& rule : script.rules) {
    if (const auto* c = std::get_if<ConstantRule>(&rule)) {
      json j = detection_to_rule(c->detection);
      j["kind"] = "constant";
      rules.push_back(std::move(j));
    } else if (const auto* t = std::get_if<RegionTriggerRule>(&rule)) {
      json j = detection_to_rule(t->detection);
      j["kind"] = "region_trigger";
      j["probe"] = {t->probe.x0, t->probe.y0, t->probe.x1, t->probe.y1};
      j["threshold"] = t->threshold;
      j["direction"] = t->fire_above ? "above" : "below";
      rules.push_back(std::move(j));
    } else if (const auto* p = std::get_if<PatchChaserRule>(&rule)) {
      rules.push_back({{"kind", "patch_chaser"},
                       {"window", p->window},
                       {"min_intensity", p->min_intensity},
                       {"confidence", p->confidence},
                       {"class", p->class_label}});
    }
  }
  return detail::dump(
      json{{"name", script.name}, {"conf_threshold", script.conf_threshold}, {"rules", std::move(rules)}});
}

double region_mean_intensity(const Image& image, const PixelRect& rect) {
  const int x0 = std::max(rect.x0, 0);
  const int y0 = std::max(rect.y0, 0);
  const int x1 = std::min(rect.x1, image.width());
  const int y1 = std::min(rect.y1, image.height());
  if (x0 >= x1 || y0 >= y1) return 0.0;
  long long sum = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) sum += pixel_intensity_sum(image, x, y);
  }
  const double count = static_cast<double>(x1 - x0) * (y1 - y0);
  return static_cast<double>(sum) / (3.0 * count);
}

WindowHit brightest_window(const Image& image, int window) {
  const int w = image.width();
  const int h = image.height();
  // Summed-area table with a zero border so windows may hang off the image.
  std::vector<long long> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  auto at = [&](int x, int y) -> long long& { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y) {
    long long row = 0;
    for (int x = 0; x < w; ++x) {
      row += pixel_intensity_sum(image, x, y);
      at(x + 1, y + 1) = at(x + 1, y) + row;
    }
  }
  auto rect_sum = [&](int left, int top) {
    const int x0 = std::clamp(left, 0, w);
    const int y0 = std::clamp(top, 0, h);
    const int x1 = std::clamp(left + window, 0, w);
    const int y1 = std::clamp(top + window, 0, h);
    return at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
  };
  WindowHit best{-(window - 1), -(window - 1), -1};
  for (int top = -(window - 1); top <= h - 1; ++top) {
    for (int left = -(window - 1); left <= w - 1; ++left) {
      const long long s = rect_sum(left, top);
      if (s > best.sum) best = {left, top, s};
    }
  }
  return best;
}

std::optional<Detection> chase_patch(const Image& image, const PatchChaserRule& rule) {
  const WindowHit hit = brightest_window(image, rule.window);
  if (hit.sum <= 0) return std::nullopt;
  int x_lo = std::numeric_limits<int>::max();
  int y_lo = std::numeric_limits<int>::max();
  int x_hi = std::numeric_limits<int>::min();
  int y_hi = std::numeric_limits<int>::min();
  const int x0 = std::max(hit.left, 0);
  const int y0 = std::max(hit.top, 0);
  const int x1 = std::min(hit.left + rule.window, image.width());
  const int y1 = std::min(hit.top + rule.window, image.height());
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      if (pixel_intensity_sum(image, x, y) >= rule.min_intensity) {
        x_lo = std::min(x_lo, x);
        y_lo = std::min(y_lo, y);
        x_hi = std::max(x_hi, x);
        y_hi = std::max(y_hi, y);
      }
    }
  }
  if (x_lo > x_hi) return std::nullopt;
  Detection d;
  d.box = {static_cast<double>(x_lo), static_cast<double>(y_lo), static_cast<double>(x_hi + 1),
           static_cast<double>(y_hi + 1)};
  d.confidence = rule.confidence;
  d.class_label = rule.class_label;
  return d;
}

protocol::HelloReply ScriptedDetector::hello() {
  return {protocol::kVersion, script_.name, script_.conf_threshold};
}

std::vector<Detection> ScriptedDetector::detect(const Image& image, const std::string&) {
  std::vector<Detection> out;
  for (const auto& rule : script_.rules) {
    if (const auto* c = std::get_if<ConstantRule>(&rule)) {
      out.push_back(c->detection);
    } else if (const auto* t = std::get_if<RegionTriggerRule>(&rule)) {
      const double mean = region_mean_intensity(image, t->probe);
      const bool fire = t->fire_above ? mean >= t->threshold : mean < t->threshold;
      if (fire) out.push_back(t->detection);
    } else if (const auto* p = std::get_if<PatchChaserRule>(&rule)) {
      if (auto d = chase_patch(image, *p)) out.push_back(*d);
    }
  }
  return out;
}

}  // namespace warp
