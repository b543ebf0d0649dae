#pragma once

namespace fuzzyseg::cli {

inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Entry point of the `fuzzyseg` command line. Returns the process exit code:
/// 0 on success, 1 when oracle-check finds a failed exactness check, 2 for
/// usage and configuration errors, 3 for runtime errors.
int run_cli(int argc, char** argv);

}  // namespace fuzzyseg::cli
