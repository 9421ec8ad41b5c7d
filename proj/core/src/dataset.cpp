#include "warp/dataset.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json_io.hpp"
#include "warp/checkpoint.hpp"
#include "warp/errors.hpp"

namespace fs = std::filesystem;

namespace warp {
namespace {

using detail::json;

std::string id_to_string(const json& j, const std::string& what) {
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  if (j.is_string()) return j.get<std::string>();
  throw DataError(what + ": id must be an integer or string");
}

json id_to_json(const std::string& id) {
  long long v = 0;
  const auto* end = id.data() + id.size();
  auto [ptr, ec] = std::from_chars(id.data(), end, v);
  if (ec == std::errc() && ptr == end && std::to_string(v) == id) return json(v);
  return json(id);
}

BoxFormat parse_box_format(const std::string& s) {
  if (s == "xywh") return BoxFormat::kXywh;
  if (s == "xyxy") return BoxFormat::kXyxy;
  if (s == "cxcywh") return BoxFormat::kCxcywh;
  throw DataError("unknown bbox_format '" + s + "'");
}

BoundingBox box_from(const json& arr, BoxFormat format, const std::string& where) {
  if (!arr.is_array() || arr.size() != 4) throw DataError(where + ": bbox must have 4 numbers");
  std::array<double, 4> v{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!arr[i].is_number()) throw DataError(where + ": bbox entries must be numbers");
    v[i] = arr[i].get<double>();
  }
  switch (format) {
    case BoxFormat::kXywh: return BoundingBox::from_xywh(v[0], v[1], v[2], v[3]);
    case BoxFormat::kXyxy: return {v[0], v[1], v[2], v[3]};
    case BoxFormat::kCxcywh: return BoundingBox::from_cxcywh(v[0], v[1], v[2], v[3]);
  }
  return {};
}

Image from_mat(const cv::Mat& decoded) {
  cv::Mat mat = decoded;
  if (mat.depth() != CV_8U) {
    cv::Mat converted;
    mat.convertTo(converted, CV_8U, mat.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
    mat = converted;
  }
  Image out(mat.cols, mat.rows);
  const int ch = mat.channels();
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      const auto* px = row + static_cast<std::ptrdiff_t>(x) * ch;
      if (ch == 1 || ch == 2) {
        out.at(x, y, 0) = out.at(x, y, 1) = out.at(x, y, 2) = px[0];
      } else {
        // OpenCV orders channels BGR(A).
        out.at(x, y, 0) = px[2];
        out.at(x, y, 1) = px[1];
        out.at(x, y, 2) = px[0];
      }
    }
  }
  return out;
}

cv::Mat to_mat(const Image& image) {
  cv::Mat mat(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width(); ++x) {
      row[3 * x + 0] = image.at(x, y, 2);
      row[3 * x + 1] = image.at(x, y, 1);
      row[3 * x + 2] = image.at(x, y, 0);
    }
  }
  return mat;
}

void write_encoded(const cv::Mat& mat, const fs::path& path) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", mat, buf)) throw DataError("PNG encoding failed for " + path.string());
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

fs::path DatasetManifest::resolve(const ImageEntry& entry) const {
  return entry.file.is_absolute() ? entry.file : root / entry.file;
}

std::vector<GroundTruthAnnotation> DatasetManifest::annotations_for(const std::string& image_id) const {
  std::vector<GroundTruthAnnotation> out;
  for (const auto& a : annotations) {
    if (a.image_id == image_id) out.push_back({a.box, a.class_label});
  }
  return out;
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U, const_cast<std::uint8_t*>(bytes.data()));
  const cv::Mat mat = cv::imdecode(buf, cv::IMREAD_ANYDEPTH | cv::IMREAD_ANYCOLOR);
  if (mat.empty()) throw DataError("image payload could not be decoded");
  return from_mat(mat);
}

Image load_image(const fs::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return decode_image(bytes);
  } catch (const DataError&) {
    throw DataError("cannot decode image " + path.string());
  }
}

RgbaImage load_rgba(const fs::path& path) {
  const auto bytes = read_bytes(path);
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat mat = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw DataError("cannot decode patch " + path.string());
  if (mat.depth() != CV_8U) {
    cv::Mat converted;
    mat.convertTo(converted, CV_8U, mat.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
    mat = converted;
  }
  RgbaImage out(mat.cols, mat.rows);
  const int ch = mat.channels();
  for (int y = 0; y < mat.rows; ++y) {
    const auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      const auto* px = row + static_cast<std::ptrdiff_t>(x) * ch;
      if (ch <= 2) {
        out.at(x, y, 0) = out.at(x, y, 1) = out.at(x, y, 2) = px[0];
        out.at(x, y, 3) = ch == 2 ? px[1] : 255;
      } else {
        out.at(x, y, 0) = px[2];
        out.at(x, y, 1) = px[1];
        out.at(x, y, 2) = px[0];
        out.at(x, y, 3) = ch == 4 ? px[3] : 255;
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", to_mat(image), buf)) throw DataError("PNG encoding failed");
  return buf;
}

void save_png(const Image& image, const fs::path& path) { write_encoded(to_mat(image), path); }

void save_png(const RgbaImage& image, const fs::path& path) {
  cv::Mat mat(image.height(), image.width(), CV_8UC4);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width(); ++x) {
      row[4 * x + 0] = image.at(x, y, 2);
      row[4 * x + 1] = image.at(x, y, 1);
      row[4 * x + 2] = image.at(x, y, 0);
      row[4 * x + 3] = image.at(x, y, 3);
    }
  }
  write_encoded(mat, path);
}

DatasetManifest parse_manifest(const std::string& json_text, const fs::path& root, LoadOptions options) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed manifest JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DataError("manifest must be a JSON object");

  DatasetManifest m;
  m.root = root;
  if (auto it = doc.find("info"); it != doc.end() && it->is_object()) {
    m.name = it->value("description", std::string{});
    m.split = it->value("split", std::string{});
  }
  const BoxFormat format = parse_box_format(doc.value("bbox_format", std::string("xywh")));

  try {
    for (const auto& img : doc.value("images", json::array())) {
      ImageEntry e;
      e.image_id = id_to_string(img.at("id"), "image");
      const std::string where = "image " + e.image_id;
      if (!img.contains("file_name")) throw DataError(where + ": missing file_name");
      e.file = img.at("file_name").get<std::string>();
      e.width = img.at("width").get<int>();
      e.height = img.at("height").get<int>();
      e.source = img.value("source", std::string{});
      m.images.push_back(std::move(e));
    }
    for (const auto& ann : doc.value("annotations", json::array())) {
      AnnotationEntry a;
      const std::string ann_id = ann.contains("id") ? id_to_string(ann.at("id"), "annotation") : "?";
      const std::string where = "annotation " + ann_id;
      if (!ann.contains("image_id")) throw DataError(where + ": missing image_id");
      a.image_id = id_to_string(ann.at("image_id"), where);
      if (!ann.contains("bbox")) throw DataError(where + ": missing bbox");
      a.box = box_from(ann.at("bbox"), format, where);
      a.class_label = ann.value("category_id", 1);
      m.annotations.push_back(std::move(a));
    }
    for (const auto& cat : doc.value("categories", json::array())) {
      m.classes[cat.at("id").get<int>()] = cat.value("name", std::string{});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest schema error: ") + e.what());
  }

  validate_manifest(m, options);
  return m;
}

DatasetManifest load_manifest(const fs::path& path, LoadOptions options) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path(), options);
}

void validate_manifest(const DatasetManifest& m, LoadOptions options) {
  std::unordered_map<std::string, const ImageEntry*> by_id;
  for (const auto& e : m.images) {
    if (!by_id.emplace(e.image_id, &e).second) throw DataError("duplicate image_id " + e.image_id);
    if (e.width < 1 || e.height < 1) throw DataError("image " + e.image_id + ": width and height must be >= 1");
  }
  std::size_t index = 0;
  for (const auto& a : m.annotations) {
    ++index;
    auto it = by_id.find(a.image_id);
    if (it == by_id.end()) {
      throw DataError("annotation #" + std::to_string(index) + " references unknown image_id " + a.image_id);
    }
    if (!a.box.valid()) {
      throw DataError("annotation #" + std::to_string(index) + " on image " + a.image_id + " has a degenerate box");
    }
    const auto& e = *it->second;
    if (a.box.x_min < 0 || a.box.y_min < 0 || a.box.x_max > e.width || a.box.y_max > e.height) {
      throw DataError("annotation #" + std::to_string(index) + " on image " + a.image_id +
                      " lies outside the image bounds");
    }
    if (a.class_label < 1) {
      throw DataError("annotation #" + std::to_string(index) + " has class label < 1");
    }
  }
  if (!options.verify_images) return;
  for (const auto& e : m.images) {
    const fs::path p = m.resolve(e);
    if (!fs::exists(p)) throw DataError("image " + e.image_id + ": file not found " + p.string());
    const Image img = load_image(p);
    if (img.width() != e.width || img.height() != e.height) {
      throw DataError("image " + e.image_id + ": declared " + std::to_string(e.width) + "x" +
                      std::to_string(e.height) + " but decoded " + std::to_string(img.width()) + "x" +
                      std::to_string(img.height()));
    }
  }
}

std::string manifest_to_json(const DatasetManifest& m) {
  json doc;
  doc["info"] = {{"description", m.name}, {"split", m.split}};
  doc["bbox_format"] = "xywh";
  json images = json::array();
  for (const auto& e : m.images) {
    json j{{"id", id_to_json(e.image_id)}, {"file_name", e.file.generic_string()},
           {"width", e.width},             {"height", e.height}};
    if (!e.source.empty()) j["source"] = e.source;
    images.push_back(std::move(j));
  }
  json anns = json::array();
  long long next_id = 1;
  for (const auto& a : m.annotations) {
    anns.push_back({{"id", next_id++},
                    {"image_id", id_to_json(a.image_id)},
                    {"category_id", a.class_label},
                    {"bbox", {a.box.x_min, a.box.y_min, a.box.width(), a.box.height()}}});
  }
  json cats = json::array();
  for (const auto& [id, name] : m.classes) cats.push_back({{"id", id}, {"name", name}});
  doc["images"] = std::move(images);
  doc["annotations"] = std::move(anns);
  doc["categories"] = std::move(cats);
  return detail::dump(doc);
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  DatasetManifest out = m;
  const fs::path dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  for (auto& e : out.images) {
    const fs::path abs = fs::absolute(m.resolve(e)).lexically_normal();
    const fs::path rel = abs.lexically_relative(fs::absolute(dir).lexically_normal());
    if (!rel.empty() && *rel.begin() != "..") e.file = rel;
    else e.file = abs;
  }
  if (!dir.empty()) fs::create_directories(dir);
  write_file_atomic(path, manifest_to_json(out));
}

ManifestImageSource::ManifestImageSource(DatasetManifest manifest, std::size_t cache_limit)
    : manifest_(std::move(manifest)), cache_limit_(cache_limit) {}

ImageRecord ManifestImageSource::load(std::size_t index) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(index); it != cache_.end()) return *it->second;
  }
  const auto& e = manifest_.images.at(index);
  auto record = std::make_shared<ImageRecord>();
  record->image_id = e.image_id;
  record->pixels = load_image(manifest_.resolve(e));
  record->annotations = manifest_.annotations_for(e.image_id);
  record->source = e.source;
  std::lock_guard lock(mutex_);
  if (cache_limit_ > 0) {
    if (cache_.size() >= cache_limit_) cache_.erase(cache_.begin());
    cache_[index] = record;
  }
  return *record;
}

AnnotationHeatmap annotation_heatmap(const DatasetManifest& m, int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("heatmap grid must be at least 1x1");
  AnnotationHeatmap h;
  h.rows = rows;
  h.cols = cols;
  h.counts.assign(static_cast<std::size_t>(rows) * cols, 0);
  std::unordered_map<std::string, const ImageEntry*> by_id;
  for (const auto& e : m.images) by_id.emplace(e.image_id, &e);
  for (const auto& a : m.annotations) {
    const auto it = by_id.find(a.image_id);
    if (it == by_id.end()) throw DataError("annotation references unknown image_id " + a.image_id);
    const double u = a.box.center_x() / it->second->width;
    const double v = a.box.center_y() / it->second->height;
    const int col = std::clamp(static_cast<int>(std::floor(u * cols)), 0, cols - 1);
    const int row = std::clamp(static_cast<int>(std::floor(v * rows)), 0, rows - 1);
    ++h.counts[static_cast<std::size_t>(row) * cols + col];
    ++h.total;
  }
  return h;
}

std::string heatmap_csv(const AnnotationHeatmap& h) {
  std::string out;
  for (int r = 0; r < h.rows; ++r) {
    for (int c = 0; c < h.cols; ++c) {
      if (c) out += ',';
      out += std::to_string(h.at(r, c));
    }
    out += '\n';
  }
  return out;
}

AnnotationHeatmap parse_heatmap_csv(const std::string& csv) {
  AnnotationHeatmap h;
  h.counts.clear();
  h.rows = 0;
  h.cols = 0;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ls, cell, ',')) {
      h.counts.push_back(std::stoll(cell));
      h.total += h.counts.back();
      ++cols;
    }
    if (h.rows > 0 && cols != h.cols) throw DataError("ragged heatmap CSV");
    h.cols = cols;
    ++h.rows;
  }
  return h;
}

std::string heatmap_json(const AnnotationHeatmap& h) {
  json counts = json::array();
  for (int r = 0; r < h.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < h.cols; ++c) row.push_back(h.at(r, c));
    counts.push_back(std::move(row));
  }
  return detail::dump(json{{"rows", h.rows},
                           {"cols", h.cols},
                           {"total", h.total},
                           {"rule", "box center"},
                           {"counts", std::move(counts)}});
}

}  // namespace warp
