// Internal JSON forms of sweep results, shared by checkpoints and reports.
#pragma once

#include "json_io.hpp"
#include "warp/checkpoint.hpp"
#include "warp/sweeps.hpp"

namespace warp::detail {

inline json sweep_point_to_json(const SweepPoint& p) {
  return json{{"level_index", p.level_index},
              {"noise_level", p.noise_level},
              {"map_original", p.map_original},
              {"map_after", p.map_after},
              {"loss", optional_number(p.loss.loss)},
              {"signed_loss", optional_number(p.loss.signed_loss)},
              {"unevaluated_images", p.unevaluated_images}};
}

inline SweepPoint sweep_point_from_json(const json& j) {
  SweepPoint p;
  p.level_index = j.at("level_index");
  p.noise_level = j.at("noise_level");
  p.map_original = j.at("map_original");
  p.map_after = j.at("map_after");
  p.loss.loss = optional_number(j.at("loss"));
  p.loss.signed_loss = optional_number(j.at("signed_loss"));
  p.unevaluated_images = j.at("unevaluated_images");
  return p;
}

inline json grid_result_to_json(const GridSweepResult& r) {
  std::vector<bool> deceived;
  std::vector<bool> flipped;
  std::vector<bool> unevaluated;
  for (const auto& s : r.slots) {
    deceived.push_back(s.deceived);
    flipped.push_back(s.flipped);
    unevaluated.push_back(!s.evaluated);
  }
  return json{{"image_id", r.image_id},
              {"original_class", std::string(to_string(r.original_class))},
              {"rows", r.grid.rows},
              {"cols", r.grid.cols},
              {"deceived_count", r.deceived_count()},
              {"flip_count", r.flip_count()},
              {"deceived", encode_bitmap(deceived)},
              {"flipped", encode_bitmap(flipped)},
              {"unevaluated", encode_bitmap(unevaluated)}};
}

inline GridSweepResult grid_result_from_json(const json& j) {
  GridSweepResult r;
  r.image_id = j.at("image_id");
  r.original_class = image_class_from_string(j.at("original_class").get<std::string>());
  r.grid.rows = j.at("rows");
  r.grid.cols = j.at("cols");
  const auto n = static_cast<std::size_t>(r.grid.slot_count());
  const auto deceived = decode_bitmap(j.at("deceived").get<std::string>(), n);
  const auto flipped = decode_bitmap(j.at("flipped").get<std::string>(), n);
  const auto unevaluated = decode_bitmap(j.at("unevaluated").get<std::string>(), n);
  r.slots.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.slots[i] = {!unevaluated[i], flipped[i], deceived[i]};
  return r;
}

}  // namespace warp::detail
