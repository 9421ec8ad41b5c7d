#include "cli/app.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

#include "cli/commands.hpp"
#include "warp/errors.hpp"

namespace warp::cli {

int run_app(const std::vector<std::string>& args) {
  CLI::App app{"Adversarial robustness harness for object detectors"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> detector;
  std::optional<std::string> variant;
  std::optional<int> count;
  bool resume = false;
  std::optional<std::size_t> stop_after;
  int verbosity = 0;
  bool quiet = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--seed", seed, "Run seed");
    sub->add_option("--detector", detector, "Detector command, URL or scripted:<rules.json>");
    sub->add_flag("-v,--verbose", verbosity, "More logging");
    sub->add_flag("-q,--quiet", quiet, "Only warnings and errors");
  };
  const auto add_sweep = [&](CLI::App* sub) {
    sub->add_flag("--resume", resume, "Continue from the checkpoint in the output directory");
    sub->add_option("--stop-after", stop_after, "Stop after this many levels (global) or images (local)");
  };

  auto* baseline = app.add_subcommand("baseline", "Detect on the unperturbed dataset");
  auto* global = app.add_subcommand("global-sweep", "Sweep the global noise overlay level");
  auto* local = app.add_subcommand("local-sweep", "Patch every grid slot of every image");
  auto* augment = app.add_subcommand("augment", "Write an augmented dataset variant");
  auto* report = app.add_subcommand("report", "Summarize the artifacts of a run directory");
  for (auto* sub : {baseline, global, local, augment, report}) add_common(sub);
  add_sweep(global);
  add_sweep(local);
  augment->add_option("--variant", variant, "gaussian_overlay | cloud_patch | mosaic | crop2x2");
  augment->add_option("--count", count, "Number of augmented samples (crop2x2: source images)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  auto logger = spdlog::get("warp");
  if (!logger) logger = spdlog::stderr_color_mt("warp");
  spdlog::set_default_logger(logger);
  spdlog::set_level(quiet ? spdlog::level::warn : verbosity > 0 ? spdlog::level::debug : spdlog::level::info);

  int rc = kExitOk;
  try {
    RunConfig config = load_run_config(config_path);
    Overrides o;
    o.seed = seed;
    o.detector = detector;
    if (!out.empty()) o.out = out;
    o.variant = variant;
    o.count = count;
    apply_overrides(config, o, std::getenv(kDetectorEnvVar));
    const SweepFlags flags{resume, stop_after};

    if (baseline->parsed()) cmd_baseline(config);
    else if (global->parsed()) cmd_global_sweep(config, flags);
    else if (local->parsed()) cmd_local_sweep(config, flags);
    else if (augment->parsed()) cmd_augment(config);
    else if (report->parsed()) cmd_report(config);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    rc = kExitConfig;
  } catch (const CheckpointMismatch& e) {
    spdlog::error("{}", e.what());
    rc = kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    rc = kExitRuntime;
  }
  return rc;
}

}  // namespace warp::cli
