#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "warp/scripted_detector.hpp"

namespace warp::cli {

/// Misbehaviours the test detector can be asked to show.
struct ServerFaults {
  int version = protocol::kVersion;
  std::chrono::milliseconds delay{0};
  /// Answer DETECT with a line that is not valid JSON.
  bool malformed = false;
  /// Send a RESULT for an unrelated request id before the real one.
  bool stale_first = false;
  /// Exit without replying to the first DETECT if this file does not exist
  /// yet (the file is created first, so a restarted process behaves).
  std::filesystem::path crash_marker;
  /// Reply with ERROR to every DETECT.
  bool always_error = false;
};

/// Protocol v1 server logic around a ScriptedDetector, shared by the stdio
/// and HTTP front ends.
class ScriptedServer {
 public:
  struct Reply {
    std::vector<std::string> lines;
    bool exit_now = false;
  };

  ScriptedServer(Script script, ServerFaults faults);
  Reply handle(std::string_view line);
  std::uint64_t detect_requests() const { return detect_requests_; }

 private:
  ScriptedDetector detector_;
  ServerFaults faults_;
  std::uint64_t detect_requests_ = 0;
};

}  // namespace warp::cli
