#pragma once

#include <iosfwd>

namespace esd {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kSeedEnvVar = "ESD_SEED";

enum ExitCode : int { ExitOk = 0, ExitUsage = 1, ExitNumeric = 2 };

/// Entry point of the `esdsim` tool. Results go to CSV files under --out;
/// short summaries go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace esd
