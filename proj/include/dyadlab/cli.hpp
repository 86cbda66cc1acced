#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "dyadlab/config.hpp"

namespace dyadlab {

enum ExitCode : int {
  kExitPass = 0,
  kExitFailure = 1,  // an asserted invariant failed, or a replay mismatched
  kExitUsage = 2,    // bad flags, unreadable or invalid config
};

struct RunOptions {
  std::filesystem::path out_dir = ".";
  unsigned threads = 1;
};

/// Runs cfg.suite and writes report.json plus the suite's tables into out_dir.
int run_suite(const RunConfig& cfg, const RunOptions& opts, std::ostream& log);

/// Recomputes the constants stored in a search artifact and compares them.
int replay_artifact(const std::filesystem::path& artifact, const RunOptions& opts, std::ostream& log);

/// Full command line entry point (flags, subcommands, exit codes).
int run_cli(int argc, const char* const* argv);

}  // namespace dyadlab
