// SPDX-License-Identifier: Apache-2.0
//
// Random architecture search and the three-arm protocol that trains each
// sampled architecture without regularization, with l2,1 and with linf,1
// from identical initial weights and batch order.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "autosize/datasets.hpp"
#include "autosize/trainer.hpp"
#include "autosize/transformer.hpp"

namespace autosize::search {

struct SearchSpace {
  std::vector<std::size_t> heads_choices;
  std::vector<std::size_t> d_model_choices;
  std::vector<std::size_t> encoder_layer_choices;
  std::vector<std::size_t> decoder_layer_choices;
  std::vector<std::size_t> ffn_dim_choices;
  std::size_t trial_budget = 1;
  std::uint64_t seed = 1;

  /// Throws ConfigError on empty or zero-valued choice sets.
  void validate() const;
};

/// heads {4, 8, 16}, d_model {128 .. 2048}, layers {2, 4, 6, 8}, ffn {512, 1024, 2048}.
SearchSpace paper_space();
/// heads {2, 4}, d_model {16, 32, 64}, layers {1, 2}, ffn {32, 64, 128}.
SearchSpace desk_space();

/// Deterministic in (space.seed, draw). Vocabulary, max_len and dropout come
/// from `base`. Draws where heads does not divide d_model are redrawn.
nn::ModelConfig sample_architecture(const SearchSpace& space, std::size_t draw, const nn::ModelConfig& base = {});

enum class Arm { None, L21, LInf1 };
std::string to_string(Arm arm);
Arm parse_arm(const std::string& text);

struct TrialRecord {
  std::size_t trial_id = 0;
  std::size_t draw = 0;
  nn::ModelConfig config;
  Arm arm = Arm::None;
  double lambda = 0.0;
  bool diverged = false;
  std::string error;
  double best_dev_perplexity = 0.0;
  double test_sequence_accuracy = 0.0;
  /// Parameters of the best checkpoint after compaction.
  std::size_t params = 0;
  double seconds = 0.0;
  std::size_t rows_total = 0;
  std::size_t rows_deleted = 0;
  /// SHA-1 of the serialized model before the first step.
  std::string init_checksum;
  /// Best-dev model, kept only when SearchOptions::keep_models is set.
  std::optional<nn::TransformerModel> best_model;
};

struct SearchResult {
  /// Ranked by dev perplexity, ties by trial id; diverged trials last in id order.
  std::vector<TrialRecord> trials;
  double cumulative_seconds = 0.0;
};

struct SearchOptions {
  nn::ModelConfig base;
  train::TrainConfig train;
  /// Trials in flight at once; 1 runs them sequentially.
  std::size_t concurrency = 1;
  bool keep_models = false;
};

/// Seed shared by all arms of one draw.
std::uint64_t trial_seed(const SearchSpace& space, std::size_t draw);

/// Trains one arm of one draw and fills its record. Divergence is recorded, not thrown.
TrialRecord run_trial(const SearchSpace& space, std::size_t draw, Arm arm, double lambda, const data::Corpus& corpus,
                      const SearchOptions& options);

SearchResult random_search(const SearchSpace& space, const data::Corpus& corpus, const SearchOptions& options);

/// Three records per draw: none, l2,1 at lambda_l21, linf,1 at lambda_linf.
SearchResult search_with_autosizing(const SearchSpace& space, const data::Corpus& corpus, double lambda_l21,
                                    double lambda_linf, const SearchOptions& options);

/// Sorts by (diverged, best_dev_perplexity, trial_id).
void rank_trials(std::vector<TrialRecord>& trials);

}  // namespace autosize::search
