#include "warp/detector.hpp"

#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "warp/cache.hpp"
#include "warp/dataset.hpp"
#include "warp/digest.hpp"
#include "warp/errors.hpp"
#include "warp/scripted_detector.hpp"

namespace fs = std::filesystem;

namespace warp {

ProtocolBackend::ProtocolBackend(std::unique_ptr<LineChannel> channel, Options options)
    : channel_(std::move(channel)), options_(std::move(options)) {
  if (options_.payload == PayloadMode::kSharedFile && options_.scratch_dir.empty()) {
    std::string tmpl = (fs::temp_directory_path() / "warp-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw TransportError("cannot create scratch directory");
    options_.scratch_dir = tmpl;
    owns_scratch_ = true;
  }
}

ProtocolBackend::~ProtocolBackend() {
  if (owns_scratch_) {
    std::error_code ec;
    fs::remove_all(options_.scratch_dir, ec);
  }
}

protocol::HelloReply ProtocolBackend::hello() {
  channel_->send(protocol::serialize(protocol::HelloRequest{}));
  const std::string line = channel_->receive(options_.timeout);
  const auto msg = protocol::parse(line, protocol::Sender::kDetector);
  if (const auto* reply = std::get_if<protocol::HelloReply>(&msg)) {
    needs_hello_ = false;
    return *reply;
  }
  if (const auto* err = std::get_if<protocol::ErrorReply>(&msg)) {
    throw ProtocolError("detector refused handshake: " + err->message);
  }
  throw ProtocolError("expected HELLO reply, got: " + line);
}

std::string ProtocolBackend::await_reply(const std::string& request_id) {
  for (;;) {
    std::string line = channel_->receive(options_.timeout);
    if (line.empty()) continue;
    const auto msg = protocol::parse(line, protocol::Sender::kDetector);
    const std::string* id = nullptr;
    if (const auto* r = std::get_if<protocol::Result>(&msg)) id = &r->request_id;
    else if (const auto* e = std::get_if<protocol::ErrorReply>(&msg)) id = &e->request_id;
    else throw ProtocolError("unexpected message while awaiting RESULT: " + line);
    if (*id == request_id) return line;
    spdlog::debug("discarding stale reply for request {}", *id);
  }
}

std::vector<Detection> ProtocolBackend::detect(const Image& image, const std::string& request_id) {
  if (!channel_->alive()) {
    spdlog::warn("detector {} is down; restarting", channel_->describe());
    channel_->restart();
    needs_hello_ = true;
  }
  if (needs_hello_) {
    const auto reply = hello();
    if (reply.version != protocol::kVersion) {
      throw ProtocolError("restarted detector speaks protocol version " + std::to_string(reply.version));
    }
  }

  protocol::DetectRequest req;
  req.request_id = request_id;
  req.width = image.width();
  req.height = image.height();
  fs::path shared;
  if (options_.payload == PayloadMode::kSharedFile) {
    shared = options_.scratch_dir / (request_id + ".png");
    save_png(image, shared);
    req.image_path = shared.string();
  } else {
    req.image_b64 = base64_encode(encode_png(image));
  }

  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      if (!p.empty()) {
        std::error_code ec;
        fs::remove(p, ec);
      }
    }
  } cleanup{shared};

  channel_->send(protocol::serialize(req));
  const std::string line = await_reply(request_id);
  auto msg = protocol::parse(line, protocol::Sender::kDetector);
  if (auto* err = std::get_if<protocol::ErrorReply>(&msg)) {
    throw TransportError("detector reported error for " + request_id + ": " + err->message);
  }
  return std::move(std::get<protocol::Result>(msg).detections);
}

DetectorHandle::DetectorHandle(std::string descriptor, std::unique_ptr<DetectorBackend> backend, Options options)
    : descriptor_(std::move(descriptor)), backend_(std::move(backend)), options_(options) {}

DetectorHandle::DetectorHandle(DetectorHandle&&) noexcept = default;
DetectorHandle& DetectorHandle::operator=(DetectorHandle&&) noexcept = default;
DetectorHandle::~DetectorHandle() = default;

void DetectorHandle::handshake() {
  const auto reply = backend_->hello();
  if (reply.version != protocol::kVersion) {
    healthy_ = false;
    throw ProtocolError("protocol version mismatch: detector speaks v" + std::to_string(reply.version) +
                        ", harness supports v" + std::to_string(protocol::kVersion));
  }
  name_ = reply.name;
  conf_threshold_ = reply.conf_threshold;
  version_ = reply.version;
  healthy_ = true;
}

std::string DetectorHandle::next_request_id() {
  return (name_.empty() ? std::string("req") : name_) + "-" + std::to_string(++request_counter_);
}

EvalOutcome DetectorHandle::detect(const ImageRecord& image) {
  if (!healthy_) throw TransportError("detector handle used before a successful handshake");
  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    const std::string id = next_request_id();
    ++transport_calls_;
    std::vector<Detection> raw;
    try {
      raw = backend_->detect(image.pixels, id);
    } catch (const TransportError& e) {
      last_error = e.what();
      spdlog::warn("detection {} on image {} failed (attempt {}/{}): {}", id, image.image_id, attempt + 1,
                   options_.retries + 1, last_error);
      continue;
    }
    std::vector<Detection> kept;
    kept.reserve(raw.size());
    for (auto& d : raw) {
      try {
        validate_detection(d);
      } catch (const std::invalid_argument& e) {
        throw ProtocolError(std::string("invalid detection from ") + backend_->describe() + ": " + e.what());
      }
      if (d.confidence >= conf_threshold_) kept.push_back(d);
    }
    return make_outcome(image.image_id, clip_detections(std::move(kept), image.pixels.width(), image.pixels.height()));
  }
  throw DetectionFailed("detection on image " + image.image_id + " failed after " +
                        std::to_string(options_.retries + 1) + " attempts: " + last_error);
}

std::vector<Detection> clip_detections(std::vector<Detection> detections, int width, int height) {
  std::vector<Detection> out;
  out.reserve(detections.size());
  for (auto& d : detections) {
    d.box = clip_box(d.box, width, height);
    if (d.box.valid()) out.push_back(d);
  }
  return out;
}

DetectorHandle open_detector(const std::string& descriptor, DetectorHandle::Options options) {
  if (descriptor.empty()) throw ConfigError("no detector configured (use --detector or $" + std::string(kDetectorEnvVar) + ")");
  constexpr std::string_view kScripted = "scripted:";
  if (descriptor.starts_with(kScripted)) {
    auto backend = std::make_unique<ScriptedDetector>(load_script(descriptor.substr(kScripted.size())));
    return DetectorHandle(descriptor, std::move(backend), options);
  }
  std::unique_ptr<LineChannel> channel;
  if (descriptor.starts_with("http://") || descriptor.starts_with("https://")) {
    channel = std::make_unique<HttpChannel>(descriptor, options.timeout);
  } else {
    channel = std::make_unique<SubprocessChannel>(descriptor);
  }
  ProtocolBackend::Options po;
  po.timeout = options.timeout;
  po.payload = options.payload;
  return DetectorHandle(descriptor, std::make_unique<ProtocolBackend>(std::move(channel), po), options);
}

EvalOutcome cached_detect(DetectorHandle& handle, const ImageRecord& image, ResponseCache& cache) {
  const std::string key = ResponseCache::key(handle.name(), image_digest(image.pixels));
  if (auto hit = cache.find(key)) return make_outcome(image.image_id, std::move(*hit));
  EvalOutcome outcome = handle.detect(image);
  cache.store(key, outcome.detections);
  return outcome;
}

}  // namespace warp
