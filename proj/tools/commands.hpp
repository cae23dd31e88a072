// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the `autosize` executable. Every command
// writes a run directory holding manifest.txt plus its artifacts.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace autosize::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitDivergence = 3,
  kExitFormat = 4,
  kExitNotEquivalent = 5,
  kExitPruneRefused = 6,
  kExitReplayMismatch = 7,
  kExitUsage = 64,
};

struct Context {
  /// Parent of generated run directories.
  std::filesystem::path run_root = "runs";
  /// Explicit run directory; generated under run_root when empty.
  std::filesystem::path out;
  /// Process-wide thread cap; 0 leaves the configured counts alone.
  std::size_t workers = 0;
  std::ostream* log = nullptr;
};

/// Root from AUTOSIZE_RUN_ROOT, else "runs".
std::filesystem::path default_run_root();

struct Artifact {
  /// "records", "bytes" or "text"; replay compares the first two kinds.
  std::string kind;
  /// Relative to the run directory.
  std::string path;
};

struct Manifest {
  std::string command;
  std::string config_text;
  std::string config_hash;
  std::string started;
  std::string finished;
  std::size_t workers = 0;
  std::string status = "ok";
  std::vector<Artifact> artifacts;

  std::string to_text() const;
  /// Throws FormatError on malformed input or a config hash mismatch.
  static Manifest parse(const std::string& text);
};

Manifest read_manifest(const std::filesystem::path& run_dir);

/// Keys that hold wall-clock measurements and are ignored by replay.
const std::vector<std::string>& timing_keys();

int cmd_prox_bench(RunConfig config, const Context& ctx);
int cmd_train(RunConfig config, const Context& ctx);
int cmd_search(RunConfig config, const Context& ctx);
int cmd_prune(RunConfig config, const Context& ctx);
int cmd_report(RunConfig config, const Context& ctx);
/// Re-runs the manifest in `run_dir` and compares artifacts, ignoring timing keys.
int cmd_replay(const std::filesystem::path& run_dir, const Context& ctx);

/// Runs `command` with its config; returns the exit code. Used by main and replay.
int dispatch(const std::string& command, RunConfig config, const Context& ctx);

/// Converts an exception escaping a command into its exit code, logging it.
int exit_code_for(const std::exception& e, std::ostream& err);

}  // namespace autosize::cli
