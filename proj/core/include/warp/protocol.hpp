#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "warp/types.hpp"

namespace warp::protocol {

/// Wire protocol v1: one UTF-8 JSON object per line, discriminated by "type".
inline constexpr int kVersion = 1;

/// Harness -> detector opening message.
struct HelloRequest {
  int version = kVersion;
};

/// Detector -> harness reply to HelloRequest.
struct HelloReply {
  int version = kVersion;
  std::string name;
  double conf_threshold = 0.0;
};

struct DetectRequest {
  std::string request_id;
  std::optional<std::string> image_path;
  std::optional<std::string> image_b64;  // base64 PNG bytes
  int width = 0;
  int height = 0;
};

struct Result {
  std::string request_id;
  std::vector<Detection> detections;
  std::optional<double> latency_ms;
};

struct ErrorReply {
  std::string request_id;
  std::string message;
};

enum class Sender { kHarness, kDetector };

using Message = std::variant<HelloRequest, HelloReply, DetectRequest, Result, ErrorReply>;

std::string serialize(const Message& message);

/// Parses one line sent by `from`. Throws ProtocolError with the raw line
/// embedded when the JSON is malformed or violates the schema.
Message parse(std::string_view line, Sender from);

/// Schema check without throwing; returns one entry per violation.
std::vector<std::string> validate(std::string_view line, Sender from);

}  // namespace warp::protocol
