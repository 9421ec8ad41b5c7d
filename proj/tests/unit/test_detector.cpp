#include <gtest/gtest.h>
#include <httplib.h>

#include <chrono>
#include <thread>

#include "cli/scripted_server.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "warp/cache.hpp"
#include "warp/detector.hpp"
#include "warp/errors.hpp"
#include "warp/perturb.hpp"
#include "warp/scripted_detector.hpp"

using namespace warp;
using namespace std::chrono_literals;

namespace {

std::string stdio_command(const std::string& rules, const std::string& extra = "") {
  return std::string(WARP_SCRIPTED_DETECTOR) + " --script " + rules + (extra.empty() ? "" : " " + extra);
}

DetectorHandle::Options fast(int retries = 2, std::chrono::milliseconds timeout = 5000ms) {
  DetectorHandle::Options o;
  o.timeout = timeout;
  o.retries = retries;
  return o;
}

fixture::json constant_script(const char* name = "const") {
  return fixture::script(name, {fixture::constant_rule({10, 10, 30, 30}, 0.8)});
}

/// Runs a ScriptedServer behind an in-process HTTP endpoint.
class HttpDetector {
 public:
  explicit HttpDetector(const fixture::json& script, cli::ServerFaults faults = {})
      : server_(fixture::parse(script), faults) {
    http_.Post("/detect", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      auto reply = server_.handle(req.body);
      if (reply.lines.empty()) {
        res.status = 500;
        return;
      }
      res.set_content(reply.lines.back(), "application/json");
    });
    port_ = http_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { http_.listen_after_bind(); });
    http_.wait_until_ready();
  }
  ~HttpDetector() {
    http_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/detect"; }

 private:
  cli::ScriptedServer server_;
  httplib::Server http_;
  std::mutex mutex_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(ScriptedDetector, ConstantRuleYieldsTruePositive) {
  fixture::TempDir dir;
  auto h = open_detector(fixture::scripted_descriptor(dir.path(), constant_script()));
  h.handshake();
  EXPECT_EQ(h.name(), "const");
  const auto out = h.detect(fixture::record("x", fixture::solid(64, 64, 0)));
  EXPECT_EQ(out.original_class, ImageClass::kTruePositive);
  ASSERT_EQ(out.detections.size(), 1u);
  EXPECT_EQ(out.detections[0].box, (BoundingBox{10, 10, 30, 30}));
}

TEST(ScriptedDetector, NoFiringRuleYieldsFalseNegative) {
  fixture::TempDir dir;
  auto h = open_detector(fixture::scripted_descriptor(
      dir.path(), fixture::script("dark", {fixture::region_rule(0, 0, 8, 8, 200, "above", {0, 0, 4, 4})})));
  h.handshake();
  EXPECT_EQ(h.detect(fixture::record("x", fixture::solid(16, 16, 10))).original_class, ImageClass::kFalseNegative);
}

TEST(ScriptedDetector, RegionTriggerDirections) {
  const Image img = fixture::solid(20, 20, 100);
  ScriptedDetector above(fixture::parse(fixture::script("a", {fixture::region_rule(0, 0, 20, 20, 100, "above", {1, 1, 5, 5})})));
  ScriptedDetector below(fixture::parse(fixture::script("b", {fixture::region_rule(0, 0, 20, 20, 100, "below", {1, 1, 5, 5})})));
  EXPECT_EQ(above.detect(img, "r").size(), 1u);  // mean == threshold fires "above"
  EXPECT_TRUE(below.detect(img, "r").empty());
  EXPECT_THROW(fixture::parse(fixture::script("c", {fixture::region_rule(0, 0, 1, 1, 1, "sideways", {0, 0, 1, 1})})),
               ConfigError);
}

TEST(ScriptedDetector, ScriptJsonRoundTrip) {
  const Script s = fixture::parse(fixture::script(
      "mix", {fixture::constant_rule({1, 2, 3, 4}, 0.4), fixture::region_rule(0, 0, 5, 5, 12.5, "below", {0, 0, 2, 2}),
              fixture::chaser_rule(7, 30)}));
  const Script again = parse_script(script_to_json(s));
  EXPECT_EQ(script_to_json(again), script_to_json(s));
  EXPECT_EQ(again.rules.size(), 3u);
}

TEST(ScriptedDetector, BrightestWindowMatchesExhaustiveSearch) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Image img = fixture::random_image(23 + static_cast<int>(seed), 19, seed);
    for (int win : {1, 5, 25}) {
      const auto got = brightest_window(img, win);
      const auto want = oracle::brightest(img, win);
      EXPECT_EQ(got.sum, want.sum);
      EXPECT_EQ(got.left, want.left);
      EXPECT_EQ(got.top, want.top);
    }
  }
}

TEST(ScriptedDetector, ChaserBoxesPatchAtSlotFiveFive) {
  Image img = fixture::solid(640, 640, 0);
  PatchSpec patch{fixture::white_patch(), 1.0};
  const GridSchedule grid;
  const auto [rec, box] = inject_patch(fixture::record("x", img), patch, {5, 5}, grid);
  const auto want = oracle::brightest(rec.pixels, 25);
  const auto got = chase_patch(rec.pixels, PatchChaserRule{});
  ASSERT_TRUE(got.has_value());
  EXPECT_EQ(got->box, box);
  EXPECT_DOUBLE_EQ(oracle::overlap(got->box, box), 1.0);
  EXPECT_EQ(want.left, static_cast<int>(box.x_min));
  EXPECT_EQ(want.top, static_cast<int>(box.y_min));
}

TEST(Gateway, SubprocessHandshakeAndDetect) {
  fixture::TempDir dir;
  fixture::write_text(dir / "r.json", constant_script("stdio-const").dump());
  auto h = open_detector(stdio_command((dir / "r.json").string()), fast());
  h.handshake();
  EXPECT_TRUE(h.healthy());
  EXPECT_EQ(h.name(), "stdio-const");
  EXPECT_DOUBLE_EQ(h.conf_threshold(), 0.25);
  const auto out = h.detect(fixture::record("x", fixture::random_image(40, 40, 1)));
  ASSERT_EQ(out.detections.size(), 1u);
  EXPECT_EQ(out.detections[0].box, (BoundingBox{10, 10, 30, 30}));
}

TEST(Gateway, SubprocessInlinePayload) {
  fixture::TempDir dir;
  fixture::write_text(dir / "r.json", fixture::script("chase", {fixture::chaser_rule()}).dump());
  auto opts = fast();
  opts.payload = PayloadMode::kInlineBase64;
  auto h = open_detector(stdio_command((dir / "r.json").string()), opts);
  h.handshake();
  Image img = fixture::solid(64, 64, 0);
  for (int y = 20; y < 30; ++y)
    for (int x = 5; x < 12; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = 255;
  const auto out = h.detect(fixture::record("x", img));
  ASSERT_EQ(out.detections.size(), 1u);
  EXPECT_EQ(out.detections[0].box, (BoundingBox{5, 20, 12, 30}));
}

TEST(Gateway, VersionMismatchNamesBothVersions) {
  fixture::TempDir dir;
  fixture::write_text(dir / "r.json", constant_script().dump());
  auto h = open_detector(stdio_command((dir / "r.json").string(), "--version-override 2"), fast());
  try {
    h.handshake();
    FAIL();
  } catch (const ProtocolError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("v2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("v1"), std::string::npos) << msg;
  }
  EXPECT_FALSE(h.healthy());
}

TEST(Gateway, DeadSubprocessFailsWithinTimeout) {
  auto h = open_detector("exit 3", fast(0, 2000ms));
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(h.handshake(), TransportError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 2500ms);
}

TEST(Gateway, SilentDetectorTimesOutThenFails) {
  fixture::TempDir dir;
  fixture::write_text(dir / "r.json", constant_script().dump());
  auto h = open_detector(stdio_command((dir / "r.json").string(), "--delay-ms 1500"), fast(1, 300ms));
  h.handshake();
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(h.detect(fixture::record("x", fixture::solid(8, 8, 0))), DetectionFailed);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 1500ms);
  EXPECT_EQ(h.transport_calls(), 2u);
}

TEST(Gateway, CrashedDetectorIsRestartedAndRetried) {
  fixture::TempDir dir;
  fixture::write_text(dir / "r.json", constant_script().dump());
  auto h = open_detector(stdio_command((dir / "r.json").string(), "--crash-marker " + (dir / "crashed").string()), fast());
  h.handshake();
  const auto out = h.detect(fixture::record("x", fixture::solid(40, 40, 0)));
  EXPECT_EQ(out.original_class, ImageClass::kTruePositive);
  EXPECT_EQ(h.transport_calls(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "crashed"));
}

TEST(Gateway, ErrorRepliesExhaustRetries) {
  fixture::TempDir dir;
  fixture::write_text(dir / "r.json", constant_script().dump());
  auto h = open_detector(stdio_command((dir / "r.json").string(), "--always-error"), fast(2));
  h.handshake();
  EXPECT_THROW(h.detect(fixture::record("x", fixture::solid(8, 8, 0))), DetectionFailed);
  EXPECT_EQ(h.transport_calls(), 3u);
}

TEST(Gateway, MalformedReplyIsHardProtocolError) {
  fixture::TempDir dir;
  fixture::write_text(dir / "r.json", constant_script().dump());
  auto h = open_detector(stdio_command((dir / "r.json").string(), "--malformed"), fast());
  h.handshake();
  EXPECT_THROW(h.detect(fixture::record("x", fixture::solid(8, 8, 0))), ProtocolError);
  EXPECT_EQ(h.transport_calls(), 1u);
}

TEST(Gateway, StaleRepliesAreSkipped) {
  fixture::TempDir dir;
  fixture::write_text(dir / "r.json", constant_script().dump());
  auto h = open_detector(stdio_command((dir / "r.json").string(), "--stale-first"), fast());
  h.handshake();
  EXPECT_EQ(h.detect(fixture::record("x", fixture::solid(40, 40, 0))).detections.size(), 1u);
  EXPECT_EQ(h.transport_calls(), 1u);
}

TEST(Gateway, HttpTransport) {
  HttpDetector server(constant_script("http-const"));
  auto h = open_detector(server.url(), fast());
  h.handshake();
  EXPECT_EQ(h.name(), "http-const");
  EXPECT_EQ(h.detect(fixture::record("x", fixture::solid(40, 40, 0))).detections.size(), 1u);
}

TEST(Gateway, HttpUnreachableIsTransportError) {
  auto h = open_detector("http://127.0.0.1:1/detect", fast(0, 500ms));
  EXPECT_THROW(h.handshake(), TransportError);
}

TEST(Gateway, BoxesAreClippedAndBelowThresholdDropped) {
  fixture::TempDir dir;
  auto h = open_detector(fixture::scripted_descriptor(
      dir.path(), fixture::script("clip",
                                  {fixture::constant_rule({-5, -5, 10, 10}, 0.9), fixture::constant_rule({50, 50, 60, 60}, 0.9),
                                   fixture::constant_rule({1, 1, 2, 2}, 0.1)},
                                  0.25)));
  h.handshake();
  const auto out = h.detect(fixture::record("x", fixture::solid(20, 20, 0)));
  ASSERT_EQ(out.detections.size(), 1u);
  EXPECT_EQ(out.detections[0].box, (BoundingBox{0, 0, 10, 10}));
}

TEST(Gateway, UnhandshakenHandleRefuses) {
  fixture::TempDir dir;
  auto h = open_detector(fixture::scripted_descriptor(dir.path(), constant_script()));
  EXPECT_THROW(h.detect(fixture::record("x", fixture::solid(4, 4, 0))), TransportError);
  EXPECT_THROW(open_detector(""), ConfigError);
}

TEST(Cache, IdenticalPixelsHitWithoutTransport) {
  fixture::TempDir dir;
  auto h = open_detector(fixture::scripted_descriptor(dir.path(), constant_script()));
  h.handshake();
  ResponseCache cache;
  const auto rec = fixture::record("x", fixture::random_image(32, 32, 4));
  const auto first = cached_detect(h, rec, cache);
  const auto second = cached_detect(h, fixture::record("x", rec.pixels), cache);
  EXPECT_EQ(first, second);
  EXPECT_EQ(h.transport_calls(), 1u);
  EXPECT_EQ(cache.hits(), 1u);
}

TEST(Cache, DifferentDetectorNameMisses) {
  fixture::TempDir dir;
  auto a = open_detector(fixture::scripted_descriptor(dir.path(), constant_script("alpha")));
  auto b = open_detector(fixture::scripted_descriptor(dir.path(), constant_script("beta")));
  a.handshake();
  b.handshake();
  ResponseCache cache;
  const auto rec = fixture::record("x", fixture::random_image(16, 16, 2));
  cached_detect(a, rec, cache);
  cached_detect(b, rec, cache);
  EXPECT_EQ(b.transport_calls(), 1u);
}

TEST(Cache, OnePixelChangeMisses) {
  fixture::TempDir dir;
  auto h = open_detector(fixture::scripted_descriptor(dir.path(), constant_script()));
  h.handshake();
  ResponseCache cache;
  auto rec = fixture::record("x", fixture::random_image(16, 16, 2));
  cached_detect(h, rec, cache);
  rec.pixels.at(3, 3, 1) ^= 0x10;
  cached_detect(h, rec, cache);
  EXPECT_EQ(h.transport_calls(), 2u);
}

TEST(Cache, PersistsAndSkipsCorruptLines) {
  fixture::TempDir dir;
  ResponseCache cache;
  cache.store(ResponseCache::key("d", "abc"), {fixture::det(1, 2, 3, 4, 0.5)});
  cache.store(ResponseCache::key("d", "def"), {});
  cache.save(dir / "c.jsonl");
  {
    std::ofstream out(dir / "c.jsonl", std::ios::app);
    out << "{not json\n" << "{\"key\": 5}\n";
  }
  ResponseCache loaded;
  EXPECT_EQ(loaded.load(dir / "c.jsonl"), 2u);
  EXPECT_EQ(loaded.size(), 2u);
  ASSERT_TRUE(loaded.find(ResponseCache::key("d", "abc")).has_value());
  EXPECT_EQ(loaded.find(ResponseCache::key("d", "abc"))->at(0).box, (BoundingBox{1, 2, 3, 4}));
  EXPECT_FALSE(loaded.find(ResponseCache::key("d", "zzz")).has_value());
}

TEST(Cache, ConcurrentWritersAndReaders) {
  ResponseCache cache;
  std::vector<std::jthread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&cache, t] {
      for (int i = 0; i < 500; ++i) {
        const auto key = ResponseCache::key("d", std::to_string(t * 1000 + i));
        cache.store(key, {fixture::det(0, 0, 1, 1, 0.5)});
        EXPECT_TRUE(cache.find(key).has_value());
      }
    });
  }
  threads.clear();
  EXPECT_EQ(cache.size(), 2000u);
}
