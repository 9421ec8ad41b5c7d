// Internal JSON conversions shared by the core sources.
#pragma once

#include <json.hpp>

#include <string>

#include "warp/errors.hpp"
#include "warp/metrics.hpp"
#include "warp/types.hpp"

namespace warp::detail {

using json = nlohmann::json;

inline json detection_to_json(const Detection& d) {
  return json{{"x_min", d.box.x_min},       {"y_min", d.box.y_min}, {"x_max", d.box.x_max},
              {"y_max", d.box.y_max},       {"confidence", d.confidence}, {"class", d.class_label}};
}

/// Throws json exceptions on missing or mistyped fields.
inline Detection detection_from_json(const json& j) {
  Detection d;
  d.box = {j.at("x_min").get<double>(), j.at("y_min").get<double>(), j.at("x_max").get<double>(),
           j.at("y_max").get<double>()};
  d.confidence = j.at("confidence").get<double>();
  d.class_label = j.at("class").get<int>();
  return d;
}

inline json detections_to_json(const std::vector<Detection>& ds) {
  json arr = json::array();
  for (const auto& d : ds) arr.push_back(detection_to_json(d));
  return arr;
}

inline std::vector<Detection> detections_from_json(const json& arr) {
  std::vector<Detection> out;
  for (const auto& j : arr) out.push_back(detection_from_json(j));
  return out;
}

inline json box_to_json(const BoundingBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

inline BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("box must be an array of 4 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> optional_number(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

/// Stable text form: sorted keys, 2-space indent, trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace warp::detail
