// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: an INI-style file with [data], [model], [train], [reg],
// [search], [bench], [prune] and [report] sections. Unknown sections and keys
// are rejected with the offending line number.
#pragma once

#include <string>
#include <vector>

#include "autosize/datasets.hpp"
#include "autosize/prox.hpp"
#include "autosize/search.hpp"
#include "autosize/sizing.hpp"
#include "autosize/trainer.hpp"
#include "autosize/transformer.hpp"

namespace autosize::cli {

struct RegSection {
  prox::Norm norm = prox::Norm::L21;
  std::vector<double> lambdas{0.0};
  std::vector<sizing::Scope> scopes{{sizing::Side::Both, sizing::Part::Ffn}};
};

struct SearchSection {
  /// "random" or "autosize".
  std::string mode = "autosize";
  search::SearchSpace space = search::desk_space();
  double lambda_l21 = 1.0;
  double lambda_linf = 10.0;
  std::size_t concurrency = 1;
};

struct BenchSection {
  std::vector<std::size_t> sizes{16, 1024, 65536, 1048576};
  std::vector<std::size_t> workers{1, 2, 4};
  std::size_t trials = 5;
  std::uint64_t seed = 1;
};

struct PruneSection {
  std::string checkpoint;
  std::size_t probes = 100;
  std::uint64_t probe_seed = 1;
  /// Optional corpus dump used instead of random probes.
  std::string probe_file;
};

struct ReportSection {
  std::vector<std::string> runs;
};

struct RunConfig {
  data::CorpusConfig data;
  nn::ModelConfig model;
  train::TrainConfig train;
  RegSection reg;
  SearchSection search;
  BenchSection bench;
  PruneSection prune;
  ReportSection report;

  /// Copies shared fields into the model (vocabulary, dropout) and validates
  /// every section. Throws ConfigError.
  void resolve();
  /// Canonical text: sections and keys sorted, every key present.
  std::string to_text() const;
};

/// `source` names the input in diagnostics ("file:line: message").
RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::string& path);

}  // namespace autosize::cli
