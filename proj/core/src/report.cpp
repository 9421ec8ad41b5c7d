#include "warp/report.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "results_json.hpp"
#include "warp/errors.hpp"

namespace warp {
namespace {

using detail::json;

json conventions_json() {
  return json{{"ap_integration", Conventions::kApIntegration}, {"matching", Conventions::kMatching},
              {"loss_sign", Conventions::kLossSign},           {"sigma", Conventions::kSigma},
              {"seed_policy", Conventions::kSeedPolicy},       {"image_class", Conventions::kImageClass},
              {"compositing", Conventions::kCompositing},      {"heatmap_rule", Conventions::kHeatmapRule},
              {"deception", Conventions::kDeception},          {"alpha_beta_mean", Conventions::kAlphaBetaMean},
              {"unevaluated", Conventions::kUnevaluated}};
}

json metadata_json(const ReportMetadata& m) {
  return json{{"detector", m.detector_name}, {"conf_threshold", m.conf_threshold}, {"seed", m.seed},
              {"patch_digest", m.patch_digest}, {"grid_rows", m.grid_rows},        {"grid_cols", m.grid_cols}};
}

json scores_json(const MapScores& s) {
  json per = json::array();
  for (const auto& t : s.per_threshold) {
    json classes = json::object();
    for (const auto& [c, ap] : t.per_class) classes[std::to_string(c)] = ap;
    per.push_back(json{{"iou_threshold", t.iou_threshold}, {"ap", t.ap}, {"per_class", std::move(classes)}});
  }
  return json{{"map50", s.map50},           {"map50_95", s.map50_95},
              {"per_threshold", std::move(per)}, {"classes", s.classes},
              {"excluded_classes", s.excluded_classes}};
}

MapScores scores_from_json(const json& j) {
  MapScores s;
  s.map50 = j.at("map50");
  s.map50_95 = j.at("map50_95");
  for (const auto& t : j.at("per_threshold")) {
    APResult r;
    r.iou_threshold = t.at("iou_threshold");
    r.ap = t.at("ap");
    for (const auto& [k, v] : t.at("per_class").items()) r.per_class[std::stoi(k)] = v.get<double>();
    s.per_threshold.push_back(std::move(r));
  }
  s.classes = j.at("classes").get<std::vector<int>>();
  s.excluded_classes = j.at("excluded_classes").get<std::vector<int>>();
  return s;
}

std::vector<std::vector<std::string>> split_csv(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

template <class T>
T parse_number(const std::string& cell, std::string_view what) {
  T value{};
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc{} || ptr != end) throw DataError("bad " + std::string(what) + " value '" + cell + "'");
  return value;
}

void expect_header(const std::vector<std::vector<std::string>>& rows, const std::vector<std::string>& header) {
  if (rows.empty() || rows.front() != header) throw DataError("unexpected CSV header");
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

RobustnessReport build_robustness_report(std::span<const GridSweepResult> results, ReportMetadata metadata) {
  RobustnessReport r;
  r.metadata = std::move(metadata);
  r.images = static_cast<std::int64_t>(results.size());
  std::vector<int> counts;
  for (const auto& res : results) {
    if (res.original_class == ImageClass::kTruePositive) ++r.tp_count;
    else ++r.fn_count;
    counts.push_back(res.deceived_count());
    r.unevaluated_cells += res.unevaluated_count();
  }
  if (!results.empty()) {
    r.metadata.grid_rows = results.front().grid.rows;
    r.metadata.grid_cols = results.front().grid.cols;
    r.expected_flip = expected_flip_probabilities(results);
    r.gamma = expected_deception_rate(counts, results.front().attempts());
  }
  r.deception_map = cumulative_deception_map(results);
  return r;
}

std::string report_json(const RobustnessReport& r) {
  json freq = json::array();
  for (const auto& [d, n] : r.gamma.frequency) {
    freq.push_back(json{{"deceived", d}, {"gamma", static_cast<double>(d) / r.gamma.attempts}, {"images", n}});
  }
  json grid = json::array();
  for (int row = 0; row < r.deception_map.rows; ++row) {
    json line = json::array();
    for (int col = 0; col < r.deception_map.cols; ++col) line.push_back(r.deception_map.at(row, col));
    grid.push_back(std::move(line));
  }
  const json doc{
      {"metadata", metadata_json(r.metadata)},
      {"conventions", conventions_json()},
      {"images", r.images},
      {"tp_images", r.tp_count},
      {"fn_images", r.fn_count},
      {"expected_alpha", r.expected_flip.alpha},
      {"expected_beta", r.expected_flip.beta},
      {"expected_gamma", r.gamma.expected},
      {"attempts_per_image", r.gamma.attempts},
      {"gamma_frequency", std::move(freq)},
      {"deception_map",
       json{{"rows", r.deception_map.rows},
            {"cols", r.deception_map.cols},
            {"counts", std::move(grid)},
            {"total", r.deception_map.total},
            {"middle_band_rows", json::array({r.deception_map.band_first_row, r.deception_map.band_last_row})},
            {"middle_share", detail::optional_number(r.deception_map.middle_share)}}},
      {"unevaluated_cells", r.unevaluated_cells}};
  return detail::dump(doc);
}

std::string baseline_json(const Baseline& b, const ReportMetadata& metadata) {
  json outcomes = json::array();
  for (const auto& o : b.outcomes) {
    outcomes.push_back(json{{"image_id", o.image_id},
                            {"class", std::string(to_string(o.original_class))},
                            {"detections", detail::detections_to_json(o.detections)}});
  }
  json meta = metadata_json(metadata);
  meta["detector"] = b.detector_name;
  meta["conf_threshold"] = b.conf_threshold;
  const json doc{{"metadata", std::move(meta)},
                 {"conventions", conventions_json()},
                 {"tp_images", b.tp_count()},
                 {"fn_images", b.fn_count()},
                 {"failed_images", b.failed_images},
                 {"scores", scores_json(b.scores)},
                 {"outcomes", std::move(outcomes)}};
  return detail::dump(doc);
}

Baseline parse_baseline_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    Baseline b;
    b.detector_name = doc.at("metadata").at("detector");
    b.conf_threshold = doc.at("metadata").at("conf_threshold");
    b.failed_images = doc.at("failed_images").get<std::vector<std::string>>();
    b.scores = scores_from_json(doc.at("scores"));
    for (const auto& o : doc.at("outcomes")) {
      EvalOutcome out = make_outcome(o.at("image_id"), detail::detections_from_json(o.at("detections")));
      if (to_string(out.original_class) != o.at("class").get<std::string>()) {
        throw DataError("baseline class of " + out.image_id + " disagrees with its detections");
      }
      b.outcomes.push_back(std::move(out));
    }
    return b;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed baseline file: ") + e.what());
  }
}

std::string global_sweep_json(std::span<const SweepPoint> points, const ReportMetadata& metadata,
                              const GlobalSweepConfig& config) {
  json pts = json::array();
  for (const auto& p : points) pts.push_back(detail::sweep_point_to_json(p));
  const json doc{{"metadata", metadata_json(metadata)},
                 {"conventions", conventions_json()},
                 {"config", json{{"a_start", config.a_start},
                                 {"a_end", config.a_end},
                                 {"a_step", config.a_step},
                                 {"repeats", config.repeats},
                                 {"levels", config.levels().size()}}},
                 {"points", std::move(pts)}};
  return detail::dump(doc);
}

std::string local_results_json(std::span<const GridSweepResult> results) {
  json arr = json::array();
  for (const auto& r : results) arr.push_back(detail::grid_result_to_json(r));
  return detail::dump(json{{"results", std::move(arr)}});
}

std::vector<GridSweepResult> parse_local_results_json(const std::string& text) {
  try {
    std::vector<GridSweepResult> out;
    const json doc = json::parse(text);
    for (const auto& j : doc.at("results")) out.push_back(detail::grid_result_from_json(j));
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed local results file: ") + e.what());
  }
}

std::string gamma_frequency_csv(const GammaSummary& gamma) {
  std::string out = "deceived,gamma,images\n";
  for (const auto& [d, n] : gamma.frequency) {
    out += std::to_string(d) + "," + format_double(static_cast<double>(d) / gamma.attempts) + "," +
           std::to_string(n) + "\n";
  }
  return out;
}

GammaSummary parse_gamma_frequency_csv(const std::string& csv, int attempts) {
  const auto rows = split_csv(csv);
  expect_header(rows, {"deceived", "gamma", "images"});
  if (attempts < 1) throw std::invalid_argument("attempts must be >= 1");
  GammaSummary g;
  g.attempts = attempts;
  std::map<double, std::int64_t> table;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw DataError("gamma frequency row needs 3 columns");
    const int d = parse_number<int>(rows[i][0], "deceived");
    const auto gamma = parse_number<double>(rows[i][1], "gamma");
    const auto n = parse_number<std::int64_t>(rows[i][2], "images");
    if (d < 0 || d > attempts || n < 0) throw DataError("gamma frequency row out of range");
    if (std::abs(gamma - static_cast<double>(d) / attempts) > 1e-9)
      throw DataError("gamma frequency row " + std::to_string(i) + ": gamma does not equal deceived/attempts");
    g.frequency[d] += n;
    g.images += n;
    table[static_cast<double>(d) / attempts] += n;
  }
  if (g.images > 0) g.expected = expectation_from_frequency(table);
  return g;
}

std::string deception_map_csv(const DeceptionMap& map) {
  std::string out;
  for (int row = 0; row < map.rows; ++row) {
    for (int col = 0; col < map.cols; ++col) {
      if (col) out += ",";
      out += std::to_string(map.at(row, col));
    }
    out += "\n";
  }
  return out;
}

DeceptionMap parse_deception_map_csv(const std::string& csv) {
  const auto rows = split_csv(csv);
  if (rows.empty()) throw DataError("deception map is empty");
  DeceptionMap m;
  m.rows = static_cast<int>(rows.size());
  m.cols = static_cast<int>(rows.front().size());
  m.counts.clear();
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != m.cols) throw DataError("deception map rows differ in length");
    for (const auto& cell : r) {
      const auto v = parse_number<std::int64_t>(cell, "count");
      if (v < 0) throw DataError("negative deception count");
      m.counts.push_back(v);
      m.total += v;
    }
  }
  std::tie(m.band_first_row, m.band_last_row) = middle_band_rows(m.rows);
  if (m.total > 0) {
    std::int64_t band = 0;
    for (int row = m.band_first_row; row <= m.band_last_row; ++row) {
      for (int col = 0; col < m.cols; ++col) band += m.at(row, col);
    }
    m.middle_share = static_cast<double>(band) / static_cast<double>(m.total);
  }
  return m;
}

std::string sweep_points_csv(std::span<const SweepPoint> points) {
  std::string out = "level_index,noise_level,map_original,map_after,loss,signed_loss,unevaluated_images\n";
  for (const auto& p : points) {
    out += std::to_string(p.level_index) + "," + format_double(p.noise_level) + "," + format_double(p.map_original) +
           "," + format_double(p.map_after) + "," + (p.loss.loss ? format_double(*p.loss.loss) : "") + "," +
           (p.loss.signed_loss ? format_double(*p.loss.signed_loss) : "") + "," +
           std::to_string(p.unevaluated_images) + "\n";
  }
  return out;
}

std::vector<SweepPoint> parse_sweep_points_csv(const std::string& csv) {
  const auto rows = split_csv(csv);
  expect_header(rows, {"level_index", "noise_level", "map_original", "map_after", "loss", "signed_loss",
                       "unevaluated_images"});
  std::vector<SweepPoint> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 7) throw DataError("sweep row needs 7 columns");
    SweepPoint p;
    p.level_index = parse_number<int>(r[0], "level_index");
    p.noise_level = parse_number<double>(r[1], "noise_level");
    p.map_original = parse_number<double>(r[2], "map_original");
    p.map_after = parse_number<double>(r[3], "map_after");
    if (!r[4].empty()) p.loss.loss = parse_number<double>(r[4], "loss");
    if (!r[5].empty()) p.loss.signed_loss = parse_number<double>(r[5], "signed_loss");
    p.unevaluated_images = parse_number<int>(r[6], "unevaluated_images");
    out.push_back(p);
  }
  return out;
}

}  // namespace warp
