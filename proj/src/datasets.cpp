// SPDX-License-Identifier: Apache-2.0
#include "autosize/datasets.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "autosize/errors.hpp"

namespace autosize::data {

namespace {

constexpr std::size_t kRedrawCap = 10000;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(which), 0x5eedu};
  return std::mt19937_64(seq);
}

std::uint64_t hash_sequence(const std::vector<int>& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (int t : s) {
    h ^= static_cast<std::uint64_t>(t) + 0x9e3779b97f4a7c15ull;
    h *= 1099511628211ull;
  }
  return h ^ s.size();
}

std::vector<int> draw_source(const CorpusConfig& c, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(c.min_len, c.max_len);
  std::uniform_int_distribution<int> tok(kFirstContent, static_cast<int>(c.vocab_size) - 1);
  std::vector<int> s(len(rng));
  for (auto& t : s) t = tok(rng);
  return s;
}

std::vector<int> make_target(Task task, const std::vector<int>& src, const std::vector<int>& perm) {
  switch (task) {
    case Task::Copy:
      return src;
    case Task::Reverse:
      return {src.rbegin(), src.rend()};
    case Task::Cipher: {
      std::vector<int> out(src.size());
      std::transform(src.begin(), src.end(), out.begin(), [&](int t) { return perm[static_cast<std::size_t>(t)]; });
      return out;
    }
  }
  return src;
}

Batch build_batch(const std::vector<SentencePair>& pairs, std::span<const std::size_t> idx) {
  std::vector<std::vector<int>> src, tgt;
  for (auto i : idx) {
    src.push_back(pairs[i].source);
    tgt.push_back(pairs[i].target);
  }
  Batch b;
  b.tokens = nn::make_batch(src, tgt);
  b.indices.assign(idx.begin(), idx.end());
  const auto& t = b.tokens;
  b.src_mask.assign(t.batch * t.src_len, 0);
  b.tgt_mask.assign(t.batch * t.tgt_len, 0);
  for (std::size_t r = 0; r < t.batch; ++r) {
    std::fill_n(b.src_mask.begin() + r * t.src_len, t.src_lengths[r], 1);
    std::fill_n(b.tgt_mask.begin() + r * t.tgt_len, t.tgt_lengths[r], 1);
  }
  return b;
}

std::vector<int> parse_ids(const std::string& text, std::size_t line_no) {
  std::istringstream is(text);
  std::vector<int> out;
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw FormatError("corpus line " + std::to_string(line_no) + ": bad token '" + tok + "'");
    }
  }
  return out;
}

}  // namespace

std::string to_string(Task t) {
  switch (t) {
    case Task::Copy:
      return "copy";
    case Task::Reverse:
      return "reverse";
    case Task::Cipher:
      return "cipher";
  }
  return "copy";
}

Task parse_task(const std::string& text) {
  if (text == "copy") return Task::Copy;
  if (text == "reverse") return Task::Reverse;
  if (text == "cipher") return Task::Cipher;
  throw ConfigError("unknown task '" + text + "' (expected copy, reverse or cipher)");
}

void CorpusConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(kFirstContent)) {
    throw ConfigError("corpus: vocab_size " + std::to_string(vocab_size) + " leaves no room beyond the reserved ids");
  }
  if (min_len == 0 || max_len < min_len) throw ConfigError("corpus: need 1 <= min_len <= max_len");
  if (train_size == 0 || dev_size == 0 || test_size == 0) throw ConfigError("corpus: split sizes must be positive");
}

std::vector<int> cipher_permutation(const CorpusConfig& config) {
  config.validate();
  std::vector<int> perm(config.vocab_size);
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = stream(config.seed, 3);
  std::shuffle(perm.begin() + kFirstContent, perm.end(), rng);
  return perm;
}

Corpus generate_corpus(const CorpusConfig& config) {
  config.validate();
  const auto perm = cipher_permutation(config);
  Corpus corpus;
  std::unordered_set<std::uint64_t> seen;
  auto fill = [&](std::vector<SentencePair>& split, std::size_t n, std::uint64_t which, bool exclusive) {
    auto rng = stream(config.seed, which);
    std::vector<std::uint64_t> added;
    for (std::size_t i = 0; i < n; ++i) {
      auto src = draw_source(config, rng);
      if (exclusive) {
        std::size_t tries = 0;
        while (seen.count(hash_sequence(src))) {
          if (++tries > kRedrawCap) {
            throw ConfigError("corpus: vocabulary/length space too small for disjoint splits");
          }
          src = draw_source(config, rng);
        }
      }
      added.push_back(hash_sequence(src));
      auto tgt = make_target(config.task, src, perm);
      split.push_back({std::move(src), std::move(tgt)});
    }
    seen.insert(added.begin(), added.end());
  };
  fill(corpus.train, config.train_size, 0, false);
  fill(corpus.dev, config.dev_size, 1, true);
  fill(corpus.test, config.test_size, 2, true);
  return corpus;
}

std::size_t split_overlap(const Corpus& corpus) {
  std::unordered_set<std::uint64_t> seen;
  for (const auto& p : corpus.train) seen.insert(hash_sequence(p.source));
  std::size_t overlap = 0;
  for (const auto* split : {&corpus.dev, &corpus.test}) {
    std::vector<std::uint64_t> added;
    for (const auto& p : *split) {
      const auto h = hash_sequence(p.source);
      if (seen.count(h)) ++overlap;
      added.push_back(h);
    }
    seen.insert(added.begin(), added.end());
  }
  return overlap;
}

std::vector<Batch> batch_iterator(const std::vector<SentencePair>& pairs, std::size_t batch_size,
                                  std::uint64_t epoch_seed) {
  if (pairs.empty()) throw InvalidInput("batch_iterator: empty corpus");
  if (batch_size == 0) throw InvalidInput("batch_iterator: batch_size must be positive");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - i);
    out.push_back(build_batch(pairs, std::span<const std::size_t>(order.data() + i, n)));
  }
  return out;
}

std::vector<Batch> ordered_batches(const std::vector<SentencePair>& pairs, std::size_t batch_size) {
  if (pairs.empty()) throw InvalidInput("ordered_batches: empty corpus");
  if (batch_size == 0) throw InvalidInput("ordered_batches: batch_size must be positive");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Batch> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - i);
    out.push_back(build_batch(pairs, std::span<const std::size_t>(order.data() + i, n)));
  }
  return out;
}

void dump_pairs(const std::vector<SentencePair>& pairs, std::ostream& out) {
  for (const auto& p : pairs) {
    for (std::size_t i = 0; i < p.source.size(); ++i) out << (i ? " " : "") << p.source[i];
    out << '\t';
    for (std::size_t i = 0; i < p.target.size(); ++i) out << (i ? " " : "") << p.target[i];
    out << '\n';
  }
}

std::vector<SentencePair> load_pairs(std::istream& in) {
  std::vector<SentencePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("corpus line " + std::to_string(line_no) + ": missing tab");
    pairs.push_back({parse_ids(line.substr(0, tab), line_no), parse_ids(line.substr(tab + 1), line_no)});
  }
  return pairs;
}

}  // namespace autosize::data
