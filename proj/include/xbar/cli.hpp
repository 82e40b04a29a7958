#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xbar {

// Exit statuses of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;      // runtime failure (I/O, pipeline)
inline constexpr int kExitConfig = 2;       // bad command line or config
inline constexpr int kExitIncomplete = 3;   // report with missing cells

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "XBARSIM_OUT";

/// The xbarsim command line, minus the program name:
///   <subcommand> [--config FILE] [--set section.key=value ...] [flags]
/// Precedence: built-in defaults < config file < --set < dedicated flags.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xbar
