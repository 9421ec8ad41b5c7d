// Builders for synthetic images, datasets and scripted detectors.
#pragma once

#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>
#include <string>
#include <vector>

#include "warp/dataset.hpp"
#include "warp/scripted_detector.hpp"
#include "warp/types.hpp"

namespace fixture {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("warp-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline warp::Image solid(int w, int h, std::uint8_t v) { return warp::Image(w, h, v); }

inline warp::Image random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  warp::Image img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(gen() & 0xff);
  return img;
}

inline warp::Detection det(double x0, double y0, double x1, double y1, double conf = 0.9, int cls = 1) {
  return {{x0, y0, x1, y1}, conf, cls};
}

inline warp::GroundTruthAnnotation gt(double x0, double y0, double x1, double y1, int cls = 1) {
  return {{x0, y0, x1, y1}, cls};
}

inline warp::ImageRecord record(std::string id, warp::Image px, std::vector<warp::GroundTruthAnnotation> anns = {}) {
  return {std::move(id), std::move(px), std::move(anns), ""};
}

/// Writes PNGs and a COCO manifest for `records`; returns the manifest path.
inline fs::path write_dataset(const fs::path& dir, const std::vector<warp::ImageRecord>& records) {
  fs::create_directories(dir / "images");
  json images = json::array(), anns = json::array();
  int ann_id = 1;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string file = "images/" + r.image_id + ".png";
    warp::save_png(r.pixels, dir / file);
    images.push_back({{"id", r.image_id}, {"file_name", file}, {"width", r.pixels.width()}, {"height", r.pixels.height()}});
    for (const auto& a : r.annotations) {
      anns.push_back({{"id", ann_id++},
                      {"image_id", r.image_id},
                      {"bbox", {a.box.x_min, a.box.y_min, a.box.x_max - a.box.x_min, a.box.y_max - a.box.y_min}},
                      {"category_id", a.class_label}});
    }
  }
  const json doc{{"info", {{"description", "synthetic"}, {"split", "test"}}},
                 {"images", images},
                 {"annotations", anns},
                 {"categories", json::array({{{"id", 1}, {"name", "smoke"}}})}};
  write_text(dir / "manifest.json", doc.dump(2));
  return dir / "manifest.json";
}

inline json constant_rule(const warp::BoundingBox& b, double conf = 0.9, int cls = 1) {
  return {{"kind", "constant"}, {"box", {b.x_min, b.y_min, b.x_max, b.y_max}}, {"confidence", conf}, {"class", cls}};
}

inline json region_rule(int x0, int y0, int x1, int y1, double threshold, const std::string& direction,
                        const warp::BoundingBox& b, double conf = 0.9) {
  return {{"kind", "region_trigger"},
          {"probe", {x0, y0, x1, y1}},
          {"threshold", threshold},
          {"direction", direction},
          {"box", {b.x_min, b.y_min, b.x_max, b.y_max}},
          {"confidence", conf},
          {"class", 1}};
}

inline json chaser_rule(int window = 25, int min_intensity = 1) {
  return {{"kind", "patch_chaser"}, {"window", window}, {"min_intensity", min_intensity}, {"confidence", 0.9}, {"class", 1}};
}

inline json script(const std::string& name, std::vector<json> rules, double conf = 0.25) {
  return {{"name", name}, {"conf_threshold", conf}, {"rules", rules}};
}

/// Writes the script and returns a "scripted:<path>" descriptor.
inline std::string scripted_descriptor(const fs::path& dir, const json& s) {
  const fs::path p = dir / (s.at("name").get<std::string>() + ".rules.json");
  write_text(p, s.dump(2));
  return "scripted:" + p.string();
}

inline warp::Script parse(const json& s) { return warp::parse_script(s.dump()); }

/// Opaque white square patch.
inline warp::RgbaImage white_patch(int size = 25) { return warp::RgbaImage(size, size, 255); }

}  // namespace fixture
