#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>

#include "cli/run_config.hpp"

namespace warp::cli {

struct SweepFlags {
  bool resume = false;
  std::optional<std::size_t> stop_after;
};

/// Each command writes into config.out and throws warp::Error subclasses on
/// failure. Returns false when a sweep stopped early (resume later).
void cmd_baseline(const RunConfig& config);
bool cmd_global_sweep(const RunConfig& config, const SweepFlags& flags = {});
bool cmd_local_sweep(const RunConfig& config, const SweepFlags& flags = {});
void cmd_augment(const RunConfig& config);
void cmd_report(const RunConfig& config);

/// Markdown summary of whatever artifacts exist in `run_dir`.
std::string render_summary(const std::filesystem::path& run_dir, const RunConfig& config);

}  // namespace warp::cli
