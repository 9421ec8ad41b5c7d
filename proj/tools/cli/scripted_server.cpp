#include "cli/scripted_server.hpp"

#include <fstream>
#include <thread>

#include "warp/dataset.hpp"
#include "warp/digest.hpp"
#include "warp/errors.hpp"

namespace warp::cli {

ScriptedServer::ScriptedServer(Script script, ServerFaults faults)
    : detector_(std::move(script)), faults_(std::move(faults)) {}

ScriptedServer::Reply ScriptedServer::handle(std::string_view line) {
  protocol::Message msg;
  try {
    msg = protocol::parse(line, protocol::Sender::kHarness);
  } catch (const ProtocolError& e) {
    return {{protocol::serialize(protocol::ErrorReply{"", e.what()})}};
  }

  if (std::holds_alternative<protocol::HelloRequest>(msg)) {
    auto hello = detector_.hello();
    hello.version = faults_.version;
    return {{protocol::serialize(hello)}};
  }
  const auto* req = std::get_if<protocol::DetectRequest>(&msg);
  if (!req) return {{protocol::serialize(protocol::ErrorReply{"", "unexpected message type"})}};

  ++detect_requests_;
  if (!faults_.crash_marker.empty() && !std::filesystem::exists(faults_.crash_marker)) {
    std::ofstream(faults_.crash_marker) << "crashed\n";
    return {{}, true};
  }
  if (faults_.delay.count() > 0) std::this_thread::sleep_for(faults_.delay);
  if (faults_.malformed) return {{"{\"type\": \"RESULT\", \"request_id\": "}};
  if (faults_.always_error) return {{protocol::serialize(protocol::ErrorReply{req->request_id, "scripted failure"})}};

  Image image;
  try {
    if (req->image_b64) {
      const auto bytes = base64_decode(*req->image_b64);
      image = decode_image(bytes);
    } else {
      image = load_image(*req->image_path);
    }
  } catch (const std::exception& e) {
    return {{protocol::serialize(protocol::ErrorReply{req->request_id, std::string("cannot read image: ") + e.what()})}};
  }
  if (image.width() != req->width || image.height() != req->height) {
    return {{protocol::serialize(protocol::ErrorReply{req->request_id, "image size does not match the request"})}};
  }

  Reply reply;
  if (faults_.stale_first) {
    reply.lines.push_back(protocol::serialize(protocol::Result{"stale-" + req->request_id, {}, std::nullopt}));
  }
  reply.lines.push_back(protocol::serialize(protocol::Result{req->request_id, detector_.detect(image, req->request_id), std::nullopt}));
  return reply;
}

}  // namespace warp::cli
