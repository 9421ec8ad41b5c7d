#include <benchmark/benchmark.h>

#include <random>

#include "warp/metrics.hpp"
#include "warp/perturb.hpp"
#include "warp/scripted_detector.hpp"

namespace {

warp::Image noise_image(int w, int h) {
  std::mt19937_64 gen(1);
  warp::Image img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(gen() & 0xff);
  return img;
}

void BM_GlobalOverlay(benchmark::State& state) {
  const auto img = noise_image(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(warp::global_overlay(img, {0.2, seed++}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(img.size()));
}
BENCHMARK(BM_GlobalOverlay)->Arg(64)->Arg(640);

void BM_MapScores(benchmark::State& state) {
  const int images = static_cast<int>(state.range(0));
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> pos(0, 600), conf(0.05, 1.0);
  warp::DetectionsPerImage dets(images);
  warp::GroundTruthPerImage gts(images);
  for (int i = 0; i < images; ++i) {
    for (int k = 0; k < 3; ++k) {
      const double x = pos(gen), y = pos(gen);
      gts[i].push_back({{x, y, x + 30, y + 30}, 1});
      dets[i].push_back({{x + 2, y + 1, x + 31, y + 29}, conf(gen), 1});
      dets[i].push_back({{pos(gen), pos(gen), 620, 620}, conf(gen), 1});
    }
  }
  for (auto _ : state) benchmark::DoNotOptimize(warp::map_scores(dets, gts));
}
BENCHMARK(BM_MapScores)->Arg(100)->Arg(1661);

void BM_BrightestWindow(benchmark::State& state) {
  const auto img = noise_image(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(warp::brightest_window(img, 25));
}
BENCHMARK(BM_BrightestWindow)->Arg(64)->Arg(640);

// One local-sweep cell: composite the patch into a copy and run the chaser.
void BM_LocalSweepCell(benchmark::State& state) {
  const auto img = noise_image(640, 640);
  const warp::PatchSpec patch{warp::default_cloud_patch(), 1.0};
  const auto slots = warp::enumerate_slots(640, 640, warp::GridSchedule{});
  const warp::PatchChaserRule rule;
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& slot = slots[i++ % slots.size()];
    auto copy = img;
    warp::composite_patch(copy, patch, slot.placement.left, slot.placement.top);
    const auto hit = warp::chase_patch(copy, rule);
    benchmark::DoNotOptimize(warp::slot_deceived(hit ? std::vector{*hit} : std::vector<warp::Detection>{},
                                                 slot.placement.box));
  }
}
BENCHMARK(BM_LocalSweepCell);

}  // namespace

BENCHMARK_MAIN();
