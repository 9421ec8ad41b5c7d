#include "warp/cache.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <mutex>

#include "json_io.hpp"
#include "warp/checkpoint.hpp"

namespace warp {

std::string ResponseCache::key(const std::string& detector_name, const std::string& image_digest) {
  return detector_name + "|" + image_digest;
}

std::optional<std::vector<Detection>> ResponseCache::find(const std::string& key) const {
  std::shared_lock lock(mutex_);
  if (auto it = entries_.find(key); it != entries_.end()) {
    ++hits_;
    return it->second;
  }
  ++misses_;
  return std::nullopt;
}

void ResponseCache::store(const std::string& key, std::vector<Detection> detections) {
  std::unique_lock lock(mutex_);
  entries_.insert_or_assign(key, std::move(detections));
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::size_t ResponseCache::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return 0;
  std::size_t skipped = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = detail::json::parse(line);
      auto detections = detail::detections_from_json(j.at("detections"));
      store(j.at("key").get<std::string>(), std::move(detections));
    } catch (const std::exception& e) {
      ++skipped;
      spdlog::warn("cache {}: skipping corrupt line {}: {}", path.string(), line_no, e.what());
    }
  }
  return skipped;
}

void ResponseCache::save(const std::filesystem::path& path) const {
  std::vector<std::pair<std::string, std::vector<Detection>>> sorted;
  {
    std::shared_lock lock(mutex_);
    sorted.assign(entries_.begin(), entries_.end());
  }
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out;
  for (const auto& [k, dets] : sorted) {
    out += detail::json{{"key", k}, {"detections", detail::detections_to_json(dets)}}.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace warp
