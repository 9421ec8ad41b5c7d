#pragma once

#include <string>
#include <vector>

namespace warp::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitConfig = 2, kExitRuntime = 3 };

/// Entry point of the `warp` tool; args excludes the program name.
int run_app(const std::vector<std::string>& args);

}  // namespace warp::cli
