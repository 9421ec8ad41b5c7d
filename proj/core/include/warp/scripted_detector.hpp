#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "warp/detector.hpp"

namespace warp {

/// Inclusive-exclusive integer pixel rectangle [x0,x1) x [y0,y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Always emits the same box.
struct ConstantRule {
  Detection detection;
};

/// Emits `detection` when the mean intensity ((R+G+B)/3) inside `probe`
/// is >= threshold (fire_above) or < threshold (otherwise).
struct RegionTriggerRule {
  PixelRect probe;
  double threshold = 0.0;
  bool fire_above = true;
  Detection detection;
};

/// Finds the window x window placement with the largest intensity sum
/// (placements may hang off the image; outside pixels count as zero, ties go
/// to the first placement in row-major order) and emits the tight box around
/// the pixels inside it whose R+G+B >= min_intensity.
struct PatchChaserRule {
  int window = 25;
  int min_intensity = 1;
  double confidence = 0.9;
  int class_label = 1;
};

using ScriptRule = std::variant<ConstantRule, RegionTriggerRule, PatchChaserRule>;

struct Script {
  std::string name = "scripted";
  double conf_threshold = 0.0;
  std::vector<ScriptRule> rules;
};

Script parse_script(const std::string& json_text);
Script load_script(const std::filesystem::path& path);
std::string script_to_json(const Script& script);

/// Deterministic rule-based detector. Every rule is evaluated; the output is
/// the concatenation of what each rule emits, in rule order.
class ScriptedDetector final : public DetectorBackend {
 public:
  explicit ScriptedDetector(Script script) : script_(std::move(script)) {}

  protocol::HelloReply hello() override;
  std::vector<Detection> detect(const Image& image, const std::string& request_id) override;
  std::string describe() const override { return "scripted: " + script_.name; }

  const Script& script() const { return script_; }

 private:
  Script script_;
};

double region_mean_intensity(const Image& image, const PixelRect& rect);

/// Result of the brightest-window search; `left`/`top` may be negative.
struct WindowHit {
  int left = 0;
  int top = 0;
  long long sum = 0;
};
WindowHit brightest_window(const Image& image, int window);

std::optional<Detection> chase_patch(const Image& image, const PatchChaserRule& rule);

}  // namespace warp
