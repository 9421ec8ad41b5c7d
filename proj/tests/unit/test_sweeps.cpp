#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "warp/errors.hpp"
#include "warp/sweeps.hpp"

using namespace warp;

namespace {

/// Fails every request whose image has a white top-left pixel.
class FlakyBackend final : public DetectorBackend {
 public:
  explicit FlakyBackend(bool always = false) : always_(always) {}
  protocol::HelloReply hello() override {
    protocol::HelloReply r;
    r.version = protocol::kVersion;
    r.name = "flaky";
    return r;
  }
  std::vector<Detection> detect(const Image& img, const std::string&) override {
    if (always_ || (img.at(0, 0, 0) == 255 && img.at(0, 0, 1) == 255)) throw TransportError("flaky");
    return {Detection{{0, 0, 4, 4}, 0.9, 1}};
  }
  std::string describe() const override { return "flaky"; }

 private:
  bool always_;
};

DetectorPool flaky_pool(bool always = false) {
  std::vector<DetectorHandle> hs;
  DetectorHandle::Options o;
  o.retries = 1;
  hs.emplace_back("flaky", std::make_unique<FlakyBackend>(always), o);
  hs.back().handshake();
  return DetectorPool(std::move(hs));
}

DetectorPool scripted_pool(const fixture::TempDir& dir, const fixture::json& script, int workers = 1) {
  return DetectorPool::open(fixture::scripted_descriptor(dir.path(), script), workers);
}

/// Images with mean intensity exactly 128 and a GT equal to the trigger box.
VectorImageSource mean128_images(int n) {
  std::vector<ImageRecord> recs;
  for (int i = 0; i < n; ++i) {
    Image img(64, 64);
    const int d = 5 + 3 * i;
    auto data = img.data();
    for (std::size_t k = 0; k < data.size(); ++k) data[k] = static_cast<std::uint8_t>(k % 2 ? 128 + d : 128 - d);
    recs.push_back(fixture::record("m" + std::to_string(i), img, {fixture::gt(8, 8, 40, 40)}));
  }
  return VectorImageSource(recs);
}

fixture::json trigger_script() {
  return fixture::script("trigger", {fixture::region_rule(0, 0, 64, 64, 0.7 * 128, "above", {8, 8, 40, 40})});
}

void expect_same_points(const std::vector<SweepPoint>& a, const std::vector<SweepPoint>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].level_index, b[i].level_index);
    EXPECT_EQ(a[i].noise_level, b[i].noise_level);
    EXPECT_EQ(a[i].map_after, b[i].map_after);
    EXPECT_EQ(a[i].loss.loss, b[i].loss.loss);
    EXPECT_EQ(a[i].unevaluated_images, b[i].unevaluated_images);
  }
}

}  // namespace

TEST(GlobalConfig, DefaultLevels) {
  const auto levels = GlobalSweepConfig{}.levels();
  ASSERT_EQ(levels.size(), 401u);
  EXPECT_EQ(levels.front(), 0.0);
  EXPECT_EQ(levels[9], 0.009);
  EXPECT_EQ(levels[300], 0.3);
  EXPECT_EQ(levels.back(), 0.4);
  for (std::size_t i = 1; i < levels.size(); ++i) ASSERT_GT(levels[i], levels[i - 1]);
}

TEST(GlobalConfig, Validation) {
  EXPECT_THROW((GlobalSweepConfig{0, 0.4, 0}.validate()), ConfigError);
  EXPECT_THROW((GlobalSweepConfig{0.5, 0.4, 0.1}.validate()), ConfigError);
  EXPECT_THROW((GlobalSweepConfig{0, 1.5, 0.1}.validate()), ConfigError);
  EXPECT_EQ((GlobalSweepConfig{0, 0, 0.001}.levels()), (std::vector<double>{0.0}));
}

TEST(GlobalSweep, ZeroLevelHasNoLoss) {
  fixture::TempDir dir;
  auto pool = scripted_pool(dir, trigger_script());
  const auto images = mean128_images(4);
  const auto base = compute_baseline(images, pool);
  EXPECT_DOUBLE_EQ(base.scores.map50_95, 1.0);
  const auto run = run_global_sweep({0, 0, 0.001, 3}, images, base, pool);
  ASSERT_EQ(run.points.size(), 1u);
  EXPECT_EQ(run.points[0].map_after, run.points[0].map_original);
  EXPECT_EQ(*run.points[0].loss.loss, 0.0);
  EXPECT_TRUE(run.finished);
}

TEST(GlobalSweep, TriggerDropsAtThirtyPercent) {
  fixture::TempDir dir;
  auto pool = scripted_pool(dir, trigger_script());
  const auto images = mean128_images(10);
  const auto base = compute_baseline(images, pool);
  const auto run = run_global_sweep({0.25, 0.35, 0.01, 17}, images, base, pool);
  ASSERT_EQ(run.points.size(), 11u);
  for (const auto& p : run.points) {
    if (p.noise_level < 0.295) EXPECT_EQ(*p.loss.loss, 0.0) << p.noise_level;
    if (p.noise_level > 0.305) EXPECT_EQ(*p.loss.loss, 100.0) << p.noise_level;
  }
  for (std::size_t i = 1; i < run.points.size(); ++i) EXPECT_GE(*run.points[i].loss.loss, *run.points[i - 1].loss.loss);
}

TEST(GlobalSweep, ResumeMatchesUninterruptedRun) {
  fixture::TempDir dir;
  auto pool = scripted_pool(dir, trigger_script());
  const auto images = mean128_images(3);
  const auto base = compute_baseline(images, pool);
  const GlobalSweepConfig cfg{0.0, 0.05, 0.001, 5};

  const auto full = run_global_sweep(cfg, images, base, pool);
  ASSERT_EQ(full.points.size(), 51u);

  SweepControl ctl;
  ctl.checkpoint = dir / "ck.json";
  ctl.stop_after = 20;
  const auto part = run_global_sweep(cfg, images, base, pool, ctl);
  EXPECT_FALSE(part.finished);
  ctl.stop_after.reset();
  ctl.resume = true;
  const auto before = pool.transport_calls();
  const auto rest = run_global_sweep(cfg, images, base, pool, ctl);
  EXPECT_TRUE(rest.finished);
  EXPECT_EQ(pool.transport_calls() - before, 31u * 3u);
  expect_same_points(rest.points, full.points);
}

TEST(GlobalSweep, ResumeWithoutCheckpointRunsEverything) {
  fixture::TempDir dir;
  auto pool = scripted_pool(dir, trigger_script());
  const auto images = mean128_images(2);
  const auto base = compute_baseline(images, pool);
  SweepControl ctl;
  ctl.checkpoint = dir / "absent.json";
  ctl.resume = true;
  const auto run = run_global_sweep({0, 0.01, 0.001, 1}, images, base, pool, ctl);
  EXPECT_TRUE(run.finished);
  EXPECT_EQ(run.points.size(), 11u);
}

TEST(GlobalSweep, ResumeWithDifferentSeedRefused) {
  fixture::TempDir dir;
  auto pool = scripted_pool(dir, trigger_script());
  const auto images = mean128_images(2);
  const auto base = compute_baseline(images, pool);
  SweepControl ctl;
  ctl.checkpoint = dir / "ck.json";
  ctl.stop_after = 2;
  run_global_sweep({0, 0.01, 0.001, 1}, images, base, pool, ctl);
  ctl.resume = true;
  EXPECT_THROW(run_global_sweep({0, 0.01, 0.001, 2}, images, base, pool, ctl), CheckpointMismatch);
}

TEST(GlobalSweep, FailedDetectionsAreCountedAndSweepContinues) {
  const auto images = mean128_images(3);
  auto good = flaky_pool();
  const auto base = compute_baseline(images, good);
  auto bad = flaky_pool(true);
  const auto run = run_global_sweep({0, 0.002, 0.001, 1}, images, base, bad);
  EXPECT_TRUE(run.finished);
  ASSERT_EQ(run.points.size(), 3u);
  for (const auto& p : run.points) {
    EXPECT_EQ(p.unevaluated_images, 3);
    EXPECT_FALSE(p.complete());
  }
}

TEST(GlobalSweep, RepeatsAverageRealizations) {
  fixture::TempDir dir;
  auto pool = scripted_pool(dir, trigger_script());
  const auto images = mean128_images(2);
  const auto base = compute_baseline(images, pool);
  GlobalSweepConfig cfg{0.1, 0.1, 0.001, 3};
  cfg.repeats = 4;
  const auto calls = pool.transport_calls();
  const auto run = run_global_sweep(cfg, images, base, pool);
  EXPECT_EQ(pool.transport_calls() - calls, 8u);
  EXPECT_EQ(*run.points[0].loss.loss, 0.0);
}

TEST(Baseline, ClassesAndFailures) {
  std::vector<ImageRecord> recs{fixture::record("ok", fixture::solid(8, 8, 0), {fixture::gt(0, 0, 4, 4)}),
                                fixture::record("bad", fixture::solid(8, 8, 255))};
  VectorImageSource images(recs);
  auto pool = flaky_pool();
  const auto b = compute_baseline(images, pool);
  EXPECT_EQ(b.detector_name, "flaky");
  EXPECT_EQ(b.tp_count(), 1);
  EXPECT_EQ(b.fn_count(), 1);
  EXPECT_EQ(b.failed_images, (std::vector<std::string>{"bad"}));
  EXPECT_DOUBLE_EQ(b.scores.map50, 1.0);
}

TEST(LocalSweep, PatchChaserDeceivesEverySlot) {
  fixture::TempDir dir;
  auto pool = scripted_pool(dir, fixture::script("chase", {fixture::chaser_rule()}));
  VectorImageSource images({fixture::record("black", fixture::solid(64, 64, 0))});
  const auto base = compute_baseline(images, pool);
  EXPECT_EQ(base.outcomes[0].original_class, ImageClass::kFalseNegative);
  const auto run = run_local_sweep({GridSchedule{}, PatchSpec{fixture::white_patch(), 1.0}}, images, base, pool);
  ASSERT_EQ(run.results.size(), 1u);
  const auto& r = run.results[0];
  EXPECT_EQ(r.deceived_count(), 625);
  EXPECT_EQ(r.gamma(), 1.0);
  EXPECT_EQ(flip_probabilities(r).beta, 1.0);
}

TEST(LocalSweep, ConstantDetectorMatchesGeometricOracle) {
  fixture::TempDir dir;
  const BoundingBox fixed{100, 100, 125, 125};
  auto pool = scripted_pool(dir, fixture::script("const", {fixture::constant_rule(fixed)}));
  VectorImageSource images({fixture::record("a", fixture::random_image(200, 150, 3))});
  const auto base = compute_baseline(images, pool);
  const auto run = run_local_sweep({GridSchedule{}, PatchSpec{default_cloud_patch(), 1.0}}, images, base, pool);
  int want = 0;
  for (int r = 0; r < 25; ++r)
    for (int c = 0; c < 25; ++c) {
      const auto [cx, cy] = oracle::slot_center(r, c, 200, 150);
      want += oracle::overlap(fixed, oracle::patch_box(cx, cy, 25, 25, 200, 150)) >= 0.5;
    }
  EXPECT_GT(want, 0);
  EXPECT_EQ(run.results[0].deceived_count(), want);
  EXPECT_EQ(run.results[0].flip_count(), 0);
}

TEST(LocalSweep, ProbeNeverEnteredPreservesClass) {
  fixture::TempDir dir;
  // On a 1000 px image slots are 40 px apart, so 25 px footprints leave
  // pixels 33..47 of each cell untouched. The probe sits in that gap and
  // would flip to FN if a white patch ever covered it.
  auto pool = scripted_pool(dir, fixture::script("probe", {fixture::region_rule(35, 35, 45, 45, 250, "below", {0, 0, 10, 10})}));
  VectorImageSource images({fixture::record("a", fixture::solid(1000, 1000, 200))});
  const auto base = compute_baseline(images, pool);
  ASSERT_EQ(base.outcomes[0].original_class, ImageClass::kTruePositive);
  const auto run = run_local_sweep({GridSchedule{}, PatchSpec{fixture::white_patch(), 1.0}}, images, base, pool);
  const auto f = flip_probabilities(run.results[0]);
  EXPECT_EQ(f.alpha, 0.0);
  EXPECT_EQ(f.beta, 0.0);
}

TEST(LocalSweep, FailedCellsAreUnevaluated) {
  VectorImageSource images({fixture::record("a", fixture::solid(64, 64, 0))});
  auto pool = flaky_pool();
  const auto base = compute_baseline(images, pool);
  const auto run = run_local_sweep({GridSchedule{}, PatchSpec{fixture::white_patch(), 1.0}}, images, base, pool);
  int covering = 0;
  for (const auto& s : enumerate_slots(64, 64, GridSchedule{})) covering += s.placement.box.x_min == 0 && s.placement.box.y_min == 0;
  const auto& r = run.results[0];
  EXPECT_EQ(r.unevaluated_count(), covering);
  EXPECT_EQ(r.attempts(), 625);
  EXPECT_EQ(r.flip_count(), 0);
  EXPECT_EQ(static_cast<int>(r.slots.size()) - r.unevaluated_count(), 625 - covering);
}

TEST(LocalSweep, ParallelEqualsSequential) {
  fixture::TempDir dir;
  const auto script = fixture::script(
      "mix", {fixture::chaser_rule(), fixture::region_rule(20, 20, 44, 44, 60, "below", {20, 20, 44, 44})});
  std::vector<ImageRecord> recs;
  for (int i = 0; i < 3; ++i) recs.push_back(fixture::record("r" + std::to_string(i), fixture::random_image(64, 48, i)));
  VectorImageSource images(recs);
  auto seq = scripted_pool(dir, script, 1);
  auto par = scripted_pool(dir, script, 4);
  const auto base = compute_baseline(images, seq);
  const LocalSweepConfig cfg{GridSchedule{}, PatchSpec{default_cloud_patch(), 1.0}};
  EXPECT_EQ(run_local_sweep(cfg, images, base, seq).results, run_local_sweep(cfg, images, base, par).results);
}

TEST(LocalSweep, ResumeAndPatchMismatch) {
  fixture::TempDir dir;
  auto pool = scripted_pool(dir, fixture::script("chase", {fixture::chaser_rule()}));
  std::vector<ImageRecord> recs;
  for (int i = 0; i < 3; ++i) recs.push_back(fixture::record("r" + std::to_string(i), fixture::random_image(50, 50, 10 + i)));
  VectorImageSource images(recs);
  const auto base = compute_baseline(images, pool);
  const LocalSweepConfig cfg{GridSchedule{}, PatchSpec{default_cloud_patch(), 1.0}};
  const auto full = run_local_sweep(cfg, images, base, pool);

  SweepControl ctl;
  ctl.checkpoint = dir / "local.json";
  ctl.stop_after = 1;
  EXPECT_FALSE(run_local_sweep(cfg, images, base, pool, ctl).finished);

  ctl.resume = true;
  ctl.stop_after.reset();
  LocalSweepConfig altered = cfg;
  altered.patch.pixels.at(12, 12, 0) ^= 1;
  EXPECT_THROW(run_local_sweep(altered, images, base, pool, ctl), CheckpointMismatch);

  const auto calls = pool.transport_calls();
  const auto rest = run_local_sweep(cfg, images, base, pool, ctl);
  EXPECT_TRUE(rest.finished);
  EXPECT_EQ(pool.transport_calls() - calls, 2u * 625u);
  EXPECT_EQ(rest.results, full.results);
}

TEST(LocalSweep, CacheServesRepeatRun) {
  fixture::TempDir dir;
  auto pool = scripted_pool(dir, fixture::script("chase", {fixture::chaser_rule()}));
  VectorImageSource images({fixture::record("a", fixture::random_image(40, 40, 1))});
  const auto base = compute_baseline(images, pool);
  ResponseCache cache;
  SweepControl ctl;
  ctl.cache = &cache;
  const LocalSweepConfig cfg{GridSchedule{}, PatchSpec{fixture::white_patch(), 1.0}};
  const auto first = run_local_sweep(cfg, images, base, pool, ctl);
  const auto calls = pool.transport_calls();
  const auto second = run_local_sweep(cfg, images, base, pool, ctl);
  EXPECT_EQ(pool.transport_calls(), calls);
  EXPECT_EQ(first.results, second.results);
}

TEST(LocalSweep, DigestTracksInputs) {
  VectorImageSource images({fixture::record("a", fixture::solid(10, 10, 0))});
  auto pool = flaky_pool();
  const auto base = compute_baseline(images, pool);
  LocalSweepConfig cfg{GridSchedule{}, PatchSpec{fixture::white_patch(), 1.0}};
  const auto d0 = local_config_digest(cfg, images, base);
  EXPECT_EQ(d0, local_config_digest(cfg, images, base));
  cfg.patch.brightness = 0.9;
  EXPECT_NE(d0, local_config_digest(cfg, images, base));
}

TEST(Pool, RejectsEmptyAndMixed) {
  EXPECT_THROW(DetectorPool(std::vector<DetectorHandle>{}), ConfigError);
  fixture::TempDir dir;
  std::vector<DetectorHandle> hs;
  hs.push_back(open_detector(fixture::scripted_descriptor(dir.path(), fixture::script("one", {}))));
  hs.push_back(open_detector(fixture::scripted_descriptor(dir.path(), fixture::script("two", {}))));
  for (auto& h : hs) h.handshake();
  EXPECT_THROW(DetectorPool(std::move(hs)), ConfigError);
}

TEST(Pool, ParallelForVisitsEveryIndexAndRethrows) {
  fixture::TempDir dir;
  auto pool = scripted_pool(dir, fixture::script("p", {}), 3);
  std::vector<std::atomic<int>> seen(500);
  parallel_for(pool, seen.size(), [&](DetectorHandle&, std::size_t i) { seen[i]++; });
  for (auto& s : seen) EXPECT_EQ(s.load(), 1);
  EXPECT_THROW(parallel_for(pool, 50, [](DetectorHandle&, std::size_t i) {
                 if (i == 17) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}
