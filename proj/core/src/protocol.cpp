#include "warp/protocol.hpp"

#include <cmath>

#include "json_io.hpp"
#include "warp/errors.hpp"

namespace warp::protocol {
namespace {

using detail::json;

struct Overloaded {
  json operator()(const HelloRequest& m) const { return {{"type", "HELLO"}, {"version", m.version}}; }
  json operator()(const HelloReply& m) const {
    return {{"type", "HELLO"}, {"version", m.version}, {"name", m.name}, {"conf_threshold", m.conf_threshold}};
  }
  json operator()(const DetectRequest& m) const {
    json j{{"type", "DETECT"}, {"request_id", m.request_id}, {"width", m.width}, {"height", m.height}};
    if (m.image_path) j["image_path"] = *m.image_path;
    if (m.image_b64) j["image_b64"] = *m.image_b64;
    return j;
  }
  json operator()(const Result& m) const {
    json j{{"type", "RESULT"}, {"request_id", m.request_id}, {"detections", detail::detections_to_json(m.detections)}};
    if (m.latency_ms) j["latency_ms"] = *m.latency_ms;
    return j;
  }
  json operator()(const ErrorReply& m) const {
    return {{"type", "ERROR"}, {"request_id", m.request_id}, {"message", m.message}};
  }
};

void require(std::vector<std::string>& errors, const json& j, const char* key, bool ok_type, const char* type) {
  if (!j.contains(key)) errors.push_back(std::string("missing field '") + key + "'");
  else if (!ok_type) errors.push_back(std::string("field '") + key + "' must be " + type);
}

std::vector<std::string> check(const json& j, Sender from) {
  std::vector<std::string> errors;
  if (!j.is_object()) return {"message is not a JSON object"};
  if (!j.contains("type") || !j["type"].is_string()) return {"missing string field 'type'"};
  const std::string type = j["type"];
  auto has = [&](const char* k) { return j.contains(k); };
  if (type == "HELLO") {
    require(errors, j, "version", has("version") && j["version"].is_number_integer(), "an integer");
    if (from == Sender::kDetector) {
      require(errors, j, "name", has("name") && j["name"].is_string(), "a string");
      require(errors, j, "conf_threshold", has("conf_threshold") && j["conf_threshold"].is_number(), "a number");
      if (has("conf_threshold") && j["conf_threshold"].is_number()) {
        const double t = j["conf_threshold"];
        if (!(t >= 0.0 && t <= 1.0)) errors.push_back("conf_threshold outside [0,1]");
      }
    }
  } else if (type == "DETECT") {
    if (from != Sender::kHarness) errors.push_back("DETECT is only sent by the harness");
    require(errors, j, "request_id", has("request_id") && j["request_id"].is_string(), "a string");
    require(errors, j, "width", has("width") && j["width"].is_number_integer(), "an integer");
    require(errors, j, "height", has("height") && j["height"].is_number_integer(), "an integer");
    const bool path = has("image_path") && j["image_path"].is_string();
    const bool b64 = has("image_b64") && j["image_b64"].is_string();
    if (path == b64) errors.push_back("exactly one of image_path or image_b64 is required");
  } else if (type == "RESULT") {
    if (from != Sender::kDetector) errors.push_back("RESULT is only sent by the detector");
    require(errors, j, "request_id", has("request_id") && j["request_id"].is_string(), "a string");
    require(errors, j, "detections", has("detections") && j["detections"].is_array(), "an array");
    if (has("detections") && j["detections"].is_array()) {
      std::size_t i = 0;
      for (const auto& d : j["detections"]) {
        const std::string where = "detections[" + std::to_string(i++) + "]";
        const std::size_t before = errors.size();
        if (!d.is_object()) {
          errors.push_back(where + " is not an object");
          continue;
        }
        for (const char* k : {"x_min", "y_min", "x_max", "y_max", "confidence"}) {
          if (!d.contains(k) || !d[k].is_number() || !std::isfinite(d[k].get<double>())) {
            errors.push_back(where + "." + k + " must be a finite number");
          }
        }
        if (!d.contains("class") || !d["class"].is_number_integer()) {
          errors.push_back(where + ".class must be an integer");
        } else if (d["class"].get<long long>() < 1) {
          errors.push_back(where + ".class must be >= 1");
        }
        if (errors.size() == before) {
          const double c = d["confidence"];
          if (!(c >= 0.0 && c <= 1.0)) errors.push_back(where + ".confidence outside [0,1]");
          if (!(d["x_min"].get<double>() < d["x_max"].get<double>() &&
                d["y_min"].get<double>() < d["y_max"].get<double>())) {
            errors.push_back(where + " has non-positive extent");
          }
        }
      }
    }
    if (has("latency_ms") && !j["latency_ms"].is_number()) errors.push_back("field 'latency_ms' must be a number");
  } else if (type == "ERROR") {
    require(errors, j, "request_id", has("request_id") && (j["request_id"].is_string() || j["request_id"].is_null()),
            "a string");
    require(errors, j, "message", has("message") && j["message"].is_string(), "a string");
  } else {
    errors.push_back("unknown message type '" + type + "'");
  }
  return errors;
}

}  // namespace

std::string serialize(const Message& message) { return std::visit(Overloaded{}, message).dump(); }

std::vector<std::string> validate(std::string_view line, Sender from) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    return {std::string("malformed JSON: ") + e.what()};
  }
  return check(j, from);
}

Message parse(std::string_view line, Sender from) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON from detector: ") + e.what() + "; raw payload: " +
                        std::string(line));
  }
  if (auto errors = check(j, from); !errors.empty()) {
    throw ProtocolError("protocol violation (" + errors.front() + "); raw payload: " + std::string(line));
  }
  const std::string type = j["type"];
  if (type == "HELLO") {
    if (from == Sender::kHarness) return HelloRequest{j["version"].get<int>()};
    return HelloReply{j["version"].get<int>(), j["name"].get<std::string>(), j["conf_threshold"].get<double>()};
  }
  if (type == "DETECT") {
    DetectRequest r;
    r.request_id = j["request_id"];
    r.width = j["width"];
    r.height = j["height"];
    if (j.contains("image_path")) r.image_path = j["image_path"].get<std::string>();
    if (j.contains("image_b64")) r.image_b64 = j["image_b64"].get<std::string>();
    return r;
  }
  if (type == "RESULT") {
    Result r;
    r.request_id = j["request_id"];
    r.detections = detail::detections_from_json(j["detections"]);
    if (j.contains("latency_ms")) r.latency_ms = j["latency_ms"].get<double>();
    return r;
  }
  ErrorReply e;
  e.request_id = j["request_id"].is_string() ? j["request_id"].get<std::string>() : std::string{};
  e.message = j["message"];
  return e;
}

}  // namespace warp::protocol
