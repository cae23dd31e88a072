// SPDX-License-Identifier: Apache-2.0
//
// Synthetic sequence-to-sequence corpora: copy, reverse and a fixed
// substitution cipher over content tokens. Ids 0/1/2 are pad/bos/eos.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "autosize/transformer.hpp"

namespace autosize::data {

enum class Task { Copy, Reverse, Cipher };
std::string to_string(Task t);
/// Throws ConfigError for anything other than copy/reverse/cipher.
Task parse_task(const std::string& text);

struct SentencePair {
  std::vector<int> source;
  std::vector<int> target;
  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

struct CorpusConfig {
  Task task = Task::Copy;
  std::size_t vocab_size = 32;
  std::size_t min_len = 3;
  std::size_t max_len = 12;
  std::size_t train_size = 2000;
  std::size_t dev_size = 200;
  std::size_t test_size = 200;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Corpus {
  std::vector<SentencePair> train;
  std::vector<SentencePair> dev;
  std::vector<SentencePair> test;
};

/// First content id; everything below is reserved.
inline constexpr int kFirstContent = 3;

/// The cipher's substitution table, indexed by token id (identity on reserved ids).
std::vector<int> cipher_permutation(const CorpusConfig& config);

/// Deterministic per seed. Dev and test sources are redrawn until they are
/// absent from every earlier split.
Corpus generate_corpus(const CorpusConfig& config);

/// Number of dev/test sources that also occur in an earlier split.
std::size_t split_overlap(const Corpus& corpus);

struct Batch {
  nn::TokenBatch tokens;
  /// Corpus positions of the pairs in this batch.
  std::vector<std::size_t> indices;
  /// 1 for real source / decoder-input positions, 0 for padding.
  std::vector<std::uint8_t> src_mask;
  std::vector<std::uint8_t> tgt_mask;
};

/// Shuffled fixed-size batches; the last batch may be short.
std::vector<Batch> batch_iterator(const std::vector<SentencePair>& pairs, std::size_t batch_size,
                                  std::uint64_t epoch_seed);
/// Batches in corpus order, for evaluation.
std::vector<Batch> ordered_batches(const std::vector<SentencePair>& pairs, std::size_t batch_size);

/// One pair per line: space-separated source ids, a tab, target ids.
void dump_pairs(const std::vector<SentencePair>& pairs, std::ostream& out);
std::vector<SentencePair> load_pairs(std::istream& in);

}  // namespace autosize::data
