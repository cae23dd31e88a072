// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "autosize/datasets.hpp"
#include "autosize/errors.hpp"

using namespace autosize;
using namespace autosize::data;

namespace {

CorpusConfig small(Task task) {
  CorpusConfig c;
  c.task = task;
  c.train_size = 300;
  c.dev_size = 50;
  c.test_size = 50;
  c.seed = 17;
  return c;
}

}  // namespace

TEST_CASE("task targets") {
  for (auto task : {Task::Copy, Task::Reverse, Task::Cipher}) {
    const auto cfg = small(task);
    const auto corpus = generate_corpus(cfg);
    const auto perm = cipher_permutation(cfg);
    for (const auto* split : {&corpus.train, &corpus.dev, &corpus.test}) {
      for (const auto& p : *split) {
        REQUIRE(p.source.size() >= cfg.min_len);
        REQUIRE(p.source.size() <= cfg.max_len);
        for (int t : p.source) {
          REQUIRE(t >= kFirstContent);
          REQUIRE(t < static_cast<int>(cfg.vocab_size));
        }
        std::vector<int> expect = p.source;
        if (task == Task::Reverse) std::reverse(expect.begin(), expect.end());
        if (task == Task::Cipher) {
          for (auto& t : expect) t = perm[t];
        }
        REQUIRE(p.target == expect);
      }
    }
  }
}

TEST_CASE("cipher is a bijection on content ids") {
  const auto perm = cipher_permutation(small(Task::Cipher));
  std::vector<int> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = static_cast<int>(i);
  for (int r = 0; r < kFirstContent; ++r) CHECK(perm[r] == r);
  const std::vector<int> f{5, 9, 3, 31};
  for (int t : f) CHECK(inverse[perm[t]] == t);
  CHECK(std::set<int>(perm.begin(), perm.end()).size() == perm.size());
}

TEST_CASE("generation is deterministic and splits are disjoint") {
  const auto a = generate_corpus(small(Task::Reverse));
  const auto b = generate_corpus(small(Task::Reverse));
  CHECK(a.train == b.train);
  CHECK(a.dev == b.dev);
  CHECK(a.test == b.test);
  CHECK(split_overlap(a) == 0);
  auto other = small(Task::Reverse);
  other.seed = 18;
  CHECK(generate_corpus(other).train != a.train);

  SUBCASE("overlap detector sees planted leakage") {
    auto leaky = a;
    leaky.dev[0] = leaky.train[5];
    CHECK(split_overlap(leaky) == 1);
  }
  SUBCASE("tiny space cannot be split") {
    CorpusConfig c;
    c.vocab_size = 4;
    c.min_len = c.max_len = 1;
    c.train_size = 5;
    CHECK_THROWS_AS(generate_corpus(c), ConfigError);
  }
}

TEST_CASE("config validation") {
  CorpusConfig c;
  c.vocab_size = 3;
  CHECK_THROWS_AS(generate_corpus(c), ConfigError);
  c = CorpusConfig{};
  c.min_len = 5;
  c.max_len = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = CorpusConfig{};
  c.dev_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_task("cipher") == Task::Cipher);
  CHECK_THROWS_AS(parse_task("shuffle"), ConfigError);
}

TEST_CASE("batch iterator") {
  const auto corpus = generate_corpus(small(Task::Copy));
  const auto& pairs = corpus.train;

  SUBCASE("partition without duplicates") {
    const auto batches = batch_iterator(pairs, 32, 5);
    std::vector<std::size_t> seen;
    for (const auto& b : batches) {
      CHECK(b.indices.size() <= 32);
      seen.insert(seen.end(), b.indices.begin(), b.indices.end());
      for (std::size_t r = 0; r < b.tokens.batch; ++r) {
        const auto& p = pairs[b.indices[r]];
        CHECK(b.tokens.src_lengths[r] == p.source.size());
        std::size_t live = 0;
        for (std::size_t j = 0; j < b.tokens.src_len; ++j) live += b.src_mask[r * b.tokens.src_len + j];
        CHECK(live == p.source.size());
      }
    }
    std::sort(seen.begin(), seen.end());
    std::vector<std::size_t> all(pairs.size());
    std::iota(all.begin(), all.end(), 0);
    CHECK(seen == all);
  }

  SUBCASE("one batch when the batch is large") {
    CHECK(batch_iterator(pairs, pairs.size(), 1).size() == 1);
    CHECK(batch_iterator(pairs, pairs.size() + 10, 1).size() == 1);
  }

  SUBCASE("order determined by epoch seed") {
    const auto a = batch_iterator(pairs, 16, 9);
    const auto b = batch_iterator(pairs, 16, 9);
    const auto c = batch_iterator(pairs, 16, 10);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].indices == b[i].indices);
    CHECK(a[0].indices != c[0].indices);
  }

  CHECK_THROWS_AS(batch_iterator({}, 4, 1), InvalidInput);
}

TEST_CASE("text dump round trip") {
  const auto corpus = generate_corpus(small(Task::Cipher));
  std::stringstream ss;
  dump_pairs(corpus.dev, ss);
  CHECK(ss.str().find('\t') != std::string::npos);
  CHECK(load_pairs(ss) == corpus.dev);
  std::stringstream bad("3 4 5 6\n");
  CHECK_THROWS_AS(load_pairs(bad), FormatError);
  std::stringstream bad_tok("3 x\t4\n");
  CHECK_THROWS_AS(load_pairs(bad_tok), FormatError);
}
