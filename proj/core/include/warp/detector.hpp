#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "warp/protocol.hpp"
#include "warp/transport.hpp"
#include "warp/types.hpp"

namespace warp {

class ResponseCache;

/// Something that turns pixels into boxes.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  /// Performs the version exchange. Throws ProtocolError or TransportError.
  virtual protocol::HelloReply hello() = 0;
  /// Throws TransportError (retryable) or ProtocolError (hard failure).
  virtual std::vector<Detection> detect(const Image& image, const std::string& request_id) = 0;
  virtual std::string describe() const = 0;
};

enum class PayloadMode { kSharedFile, kInlineBase64 };

/// Talks protocol v1 over a LineChannel.
class ProtocolBackend final : public DetectorBackend {
 public:
  struct Options {
    std::chrono::milliseconds timeout{30000};
    PayloadMode payload = PayloadMode::kSharedFile;
    /// Where shared image files are written; defaults to a fresh temp dir.
    std::filesystem::path scratch_dir;
  };

  ProtocolBackend(std::unique_ptr<LineChannel> channel, Options options);
  ~ProtocolBackend() override;

  protocol::HelloReply hello() override;
  std::vector<Detection> detect(const Image& image, const std::string& request_id) override;
  std::string describe() const override { return channel_->describe(); }

 private:
  std::string await_reply(const std::string& request_id);

  std::unique_ptr<LineChannel> channel_;
  Options options_;
  bool owns_scratch_ = false;
  bool needs_hello_ = false;
};

/// A connection to one detector. One request in flight at a time; run
/// several handles for parallelism.
class DetectorHandle {
 public:
  struct Options {
    std::chrono::milliseconds timeout{30000};
    int retries = 2;
    PayloadMode payload = PayloadMode::kSharedFile;
  };

  DetectorHandle(std::string descriptor, std::unique_ptr<DetectorBackend> backend, Options options);
  DetectorHandle(std::string descriptor, std::unique_ptr<DetectorBackend> backend)
      : DetectorHandle(std::move(descriptor), std::move(backend), Options{}) {}

  DetectorHandle(DetectorHandle&&) noexcept;
  DetectorHandle& operator=(DetectorHandle&&) noexcept;
  ~DetectorHandle();

  /// Exchanges HELLO messages and records the detector's identity. Throws
  /// ProtocolError naming both versions on mismatch.
  void handshake();
  bool healthy() const { return healthy_; }

  const std::string& descriptor() const { return descriptor_; }
  const std::string& name() const { return name_; }
  double conf_threshold() const { return conf_threshold_; }
  int protocol_version() const { return version_; }
  const Options& options() const { return options_; }

  /// Runs the detector on one image with the retry policy: each retry uses a
  /// fresh request id. Boxes are clipped to the image; boxes that vanish are
  /// dropped. Throws DetectionFailed once retries are exhausted.
  EvalOutcome detect(const ImageRecord& image);

  /// Number of requests that reached the backend (including retries).
  std::uint64_t transport_calls() const { return transport_calls_; }

 private:
  std::string next_request_id();

  std::string descriptor_;
  std::unique_ptr<DetectorBackend> backend_;
  Options options_;
  bool healthy_ = false;
  std::string name_;
  double conf_threshold_ = 0.0;
  int version_ = 0;
  std::uint64_t request_counter_ = 0;
  std::uint64_t transport_calls_ = 0;
};

/// Builds a handle from a descriptor:
///   scripted:<rules.json>   in-process ScriptedDetector
///   http://... / https://... remote detector over HTTP
///   anything else            shell command speaking protocol v1 on stdio
/// The handle is not handshaken yet.
DetectorHandle open_detector(const std::string& descriptor, DetectorHandle::Options options = {});

/// Name of the environment variable holding the default detector descriptor.
inline constexpr const char* kDetectorEnvVar = "WARP_DETECTOR";

/// Clips every box to the image and drops the ones with no area left.
std::vector<Detection> clip_detections(std::vector<Detection> detections, int width, int height);

EvalOutcome cached_detect(DetectorHandle& handle, const ImageRecord& image, ResponseCache& cache);

}  // namespace warp
