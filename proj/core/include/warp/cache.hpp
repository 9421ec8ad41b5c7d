#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "warp/types.hpp"

namespace warp {

/// Detector responses keyed by (detector name, image content digest).
/// Safe for concurrent readers and writers.
class ResponseCache {
 public:
  static std::string key(const std::string& detector_name, const std::string& image_digest);

  std::optional<std::vector<Detection>> find(const std::string& key) const;
  void store(const std::string& key, std::vector<Detection> detections);

  std::size_t size() const;
  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }

  /// Appends entries as JSON lines. Corrupt lines are skipped on load and
  /// logged; returns the number of lines skipped.
  std::size_t load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::vector<Detection>> entries_;
  mutable std::atomic<std::uint64_t> hits_{0};
  mutable std::atomic<std::uint64_t> misses_{0};
};

}  // namespace warp
