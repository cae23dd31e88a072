// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <iostream>

#include "autosize/errors.hpp"
#include "commands.hpp"

using namespace autosize::cli;

namespace {

RunConfig config_or_defaults(const std::string& path) {
  return path.empty() ? parse_run_config("", "defaults") : load_run_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Auto-sizing Transformer toolkit: proximal group regularization, training, search and pruning."};
  app.require_subcommand(1);

  Context ctx;
  ctx.run_root = default_run_root();
  std::string out, run_root;
  app.add_option("--workers", ctx.workers, "Cap on threads used anywhere in the process (0: no cap)");
  app.add_option("--out", out, "Run directory to create instead of a generated one");
  app.add_option("--run-root", run_root, "Parent of generated run directories (default: $AUTOSIZE_RUN_ROOT or runs)");

  std::string config_path;

  auto* bench = app.add_subcommand("prox-bench", "Time the sort-and-scan l-infinity prox against the selection reference");
  std::vector<std::size_t> sizes, bench_workers;
  std::size_t trials = 0;
  bench->add_option("--config", config_path, "Run config; the [bench] section applies")->check(CLI::ExistingFile);
  bench->add_option("--sizes", sizes, "Row lengths")->delimiter(',');
  bench->add_option("--bench-workers", bench_workers, "Worker counts to time")->delimiter(',');
  bench->add_option("--trials", trials, "Rows timed per size");

  auto* train = app.add_subcommand("train", "Train one model per (scope, lambda) cell of the config");
  train->add_option("config", config_path, "Run config")->required()->check(CLI::ExistingFile);

  auto* search = app.add_subcommand("search", "Random architecture search, optionally with the auto-sizing arms");
  search->add_option("config", config_path, "Run config")->required()->check(CLI::ExistingFile);

  auto* prune = app.add_subcommand("prune", "Compact a checkpoint by dropping deleted units and dead sublayers");
  std::string checkpoint, probe_file;
  std::size_t probes = 0;
  prune->add_option("checkpoint", checkpoint, "Checkpoint to compact")->required();
  prune->add_option("--config", config_path, "Run config; the [prune] section applies")->check(CLI::ExistingFile);
  prune->add_option("--probes", probes, "Random probe count");
  prune->add_option("--probe-file", probe_file, "Probe pairs, one per line (source ids, tab, target ids)");

  auto* report = app.add_subcommand("report", "Consolidate run directories into a scope by coefficient table");
  std::vector<std::string> runs;
  report->add_option("runs", runs, "Run directories")->required();

  auto* replay = app.add_subcommand("replay", "Re-run a manifest and compare its artifacts");
  std::string replay_dir;
  replay->add_option("run_dir", replay_dir, "Run directory holding manifest.txt")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (!out.empty()) ctx.out = out;
  if (!run_root.empty()) ctx.run_root = run_root;

  try {
    if (*replay) return cmd_replay(replay_dir, ctx);
    RunConfig config = config_or_defaults(config_path);
    if (*bench) {
      if (!sizes.empty()) config.bench.sizes = sizes;
      if (!bench_workers.empty()) config.bench.workers = bench_workers;
      if (trials > 0) config.bench.trials = trials;
      config.resolve();
      return cmd_prox_bench(config, ctx);
    }
    if (*train) return cmd_train(config, ctx);
    if (*search) return cmd_search(config, ctx);
    if (*prune) {
      config.prune.checkpoint = checkpoint;
      if (probes > 0) config.prune.probes = probes;
      if (!probe_file.empty()) config.prune.probe_file = probe_file;
      return cmd_prune(config, ctx);
    }
    if (*report) {
      config.report.runs = runs;
      return cmd_report(config, ctx);
    }
  } catch (const std::exception& e) {
    return exit_code_for(e, std::cerr);
  }
  return kExitUsage;
}
