// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "autosize/checkpoint.hpp"
#include "autosize/errors.hpp"
#include "autosize/sizing.hpp"

using namespace autosize;
using namespace autosize::sizing;

namespace {

nn::ModelConfig cfg(std::size_t enc = 1, std::size_t dec = 1) {
  nn::ModelConfig c;
  c.encoder_layers = enc;
  c.decoder_layers = dec;
  c.d_model = 16;
  c.heads = 2;
  c.ffn_dims.assign(enc + dec, 20);
  c.vocab_size = 14;
  c.max_len = 10;
  return c;
}

std::vector<data::SentencePair> probes(std::size_t n) {
  data::CorpusConfig c;
  c.vocab_size = 14;
  c.min_len = 1;
  c.max_len = 9;
  c.train_size = n;
  c.dev_size = 1;
  c.test_size = 1;
  c.seed = 99;
  return data::generate_corpus(c).train;
}

RowCount naive_census(const Tensor& w) {
  RowCount c{w.rows(), 0};
  for (std::size_t r = 0; r < w.rows(); ++r) {
    bool zero = true;
    for (std::size_t j = 0; j < w.cols(); ++j) zero = zero && w.at(r, j) == 0.0f;
    c.rows_deleted += zero;
  }
  return c;
}

void zero_rows(Tensor& w, std::mt19937_64& rng, double p) {
  std::bernoulli_distribution kill(p);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    if (kill(rng)) std::fill(w.row(r).begin(), w.row(r).end(), 0.0f);
  }
}

}  // namespace

TEST_CASE("row census examples") {
  CHECK(row_census(Tensor::matrix(2, 2, {0, 0, 1, 0})) == RowCount{2, 1});
  CHECK(row_census(Tensor({5, 3})) == RowCount{5, 5});
  const auto tiny = Tensor::matrix(1, 2, {1e-9f, 0});
  CHECK(row_census(tiny, 1e-8) == RowCount{1, 1});
  CHECK(row_census(tiny, 0.0) == RowCount{1, 0});
  CHECK_THROWS_AS(row_census(Tensor({4})), ShapeError);
}

TEST_CASE("census agrees with a double loop on random sparse matrices") {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n01;
  std::bernoulli_distribution sparse(0.7);
  for (int trial = 0; trial < 300; ++trial) {
    Tensor w({1 + rng() % 9, 1 + rng() % 9});
    for (auto& v : w.values()) v = sparse(rng) ? 0.0f : n01(rng);
    REQUIRE(row_census(w) == naive_census(w));
  }
}

TEST_CASE("sizing report accounting") {
  nn::TransformerModel m(cfg(2, 1), 1);
  const auto fresh = sizing_report(m);
  CHECK(fresh.rows_deleted() == 0);
  std::size_t rows = 0, in_scope = 0;
  for (const auto& g : fresh.groups) {
    rows += g.rows_total;
    in_scope += m.param(g.id).value.size();
  }
  CHECK(rows == fresh.rows_total());
  CHECK(in_scope == fresh.params_in_scope);
  CHECK(fresh.params_total == m.parameter_count());
  CHECK(std::is_sorted(fresh.groups.begin(), fresh.groups.end(),
                       [](const GroupRecord& a, const GroupRecord& b) { return a.id < b.id; }));

  for (auto& [id, p] : m.parameters()) {
    if (p.auto_sized) p.value.fill(0.0f);
  }
  const auto dead = sizing_report(m);
  CHECK(dead.fraction_deleted() == 1.0);
  CHECK(dead.params_nonzero == 0);
  std::size_t comp_rows = 0;
  for (const auto& [name, c] : component_census(dead)) comp_rows += c.rows_deleted;
  CHECK(comp_rows == dead.rows_deleted());
}

TEST_CASE("scope selection") {
  auto six = cfg(6, 6);
  six.d_model = 512;
  six.heads = 4;
  six.ffn_dims.assign(12, 1024);
  CHECK(select_scope(six, parse_scope("encdec-ffn")).size() == 24);
  CHECK(select_scope(cfg(2, 1), parse_scope("enc-all")).size() == 12);
  for (auto a : all_scopes()) {
    if (a.side != Side::Encoder) continue;
    for (auto b : all_scopes()) {
      if (b.side != Side::Decoder) continue;
      for (const auto& id : select_scope(six, a)) CHECK_FALSE(select_scope(six, b).count(id));
    }
  }
  const auto dec_all = select_scope(cfg(), parse_scope("dec-all"));
  CHECK(dec_all.count("dec.0.cross_attn.Wq"));
  CHECK(scope_label(parse_scope("encdec-ffn")) == "Enc+Dec FFN");
  CHECK_THROWS_AS(parse_scope("middle-all"), ConfigError);

  SUBCASE("in-scope parameter ordering") {
    for (const auto& c : {cfg(), cfg(2, 3), six}) {
      nn::TransformerModel m(c.d_model > 64 ? cfg() : c, 1);
      auto all = select_scope(m, parse_scope("encdec-all"));
      auto ffn = select_scope(m, parse_scope("encdec-ffn"));
      const auto ra = sizing_report(m, 0.0, &all);
      const auto rf = sizing_report(m, 0.0, &ffn);
      CHECK(ra.params_in_scope >= rf.params_in_scope);
    }
  }
}

TEST_CASE("reference shape has more FFN than attention parameters") {
  auto c = cfg(6, 6);
  c.d_model = 512;
  c.heads = 8;
  c.ffn_dims.assign(12, 2048);
  const double attn = static_cast<double>(attention_parameter_count(c));
  const double ffn = static_cast<double>(ffn_parameter_count(c));
  CHECK(ffn > attn);
  // 18 attention blocks of 4 d^2 + 4 d against 12 FFNs of 2 d f + f + d.
  CHECK(attn == 18.0 * (4 * 512.0 * 512 + 4 * 512));
  CHECK(ffn == 12.0 * (2 * 512.0 * 2048 + 2048 + 512));
}

TEST_CASE("prune without zero rows changes nothing") {
  nn::TransformerModel m(cfg(), 2);
  const auto r = prune_model(m);
  CHECK(r.units_removed == 0);
  CHECK(r.sublayers_bypassed.empty());
  CHECK(serialize_model(r.model) == serialize_model(m));
}

TEST_CASE("prune removes zero units and keeps outputs") {
  std::mt19937_64 rng(7);
  const auto ps = probes(100);
  for (int trial = 0; trial < 5; ++trial) {
    nn::TransformerModel m(cfg(2, 2), 10 + trial);
    for (auto& [id, p] : m.parameters()) {
      if (id.ends_with(".ffn.W1")) zero_rows(p.value, rng, 0.5);
      if (id.ends_with(".ffn.b1")) {
        std::normal_distribution<float> n01;
        for (auto& v : p.value.values()) v = 0.1f * n01(rng);
      }
    }
    couple_ffn_biases(m);
    auto r = prune_model(m);
    CHECK(r.units_removed > 0);
    CHECK(verify_prune_equivalence(m, r.model, ps) <= 1e-5);
  }
}

TEST_CASE("fully deleted FFNs become pass-throughs") {
  nn::TransformerModel m(cfg(2, 2), 3);
  for (auto& [id, p] : m.parameters()) {
    if (id.find(".ffn.") != std::string::npos) p.value.fill(0.0f);
  }
  auto r = prune_model(m);
  CHECK(r.model.config().bypassed.size() == 4);
  CHECK(r.model.parameter_count() == m.parameter_count() - ffn_parameter_count(m.config()));
  CHECK(serialize_model(r.model).size() < serialize_model(m).size());
  CHECK(verify_prune_equivalence(m, r.model, probes(100)) <= 1e-5);

  SUBCASE("nonzero b2 is kept") {
    nn::TransformerModel k = m;
    k.param("enc.0.ffn.b2").value[3] = 0.5f;
    auto kr = prune_model(k);
    CHECK_FALSE(kr.model.config().bypassed.count("enc.0.ffn"));
    CHECK(kr.model.config().ffn_dims[0] == 0);
    CHECK(kr.model.has_param("enc.0.ffn.b2"));
    CHECK(verify_prune_equivalence(k, kr.model, probes(30)) <= 1e-5);
  }
}

TEST_CASE("dead attention blocks are bypassed") {
  nn::TransformerModel m(cfg(), 3);
  m.param("dec.0.cross_attn.Wo").value.fill(0.0f);
  m.param("dec.0.cross_attn.bo").value.fill(0.0f);
  auto r = prune_model(m);
  CHECK(r.sublayers_bypassed == std::vector<std::string>{"dec.0.cross_attn"});
  CHECK(verify_prune_equivalence(m, r.model, probes(50)) <= 1e-5);
}

TEST_CASE("prune refuses a zero row with a live bias") {
  nn::TransformerModel m(cfg(), 3);
  auto& w1 = m.param("enc.0.ffn.W1").value;
  std::fill(w1.row(4).begin(), w1.row(4).end(), 0.0f);
  m.param("enc.0.ffn.b1").value[4] = 0.25f;
  CHECK_THROWS_AS(prune_model(m), PruneError);
}

TEST_CASE("equivalence check can fail and validates input") {
  nn::TransformerModel a(cfg(), 1), b(cfg(), 2);
  CHECK(verify_prune_equivalence(a, b, probes(20)) > 1e-2);
  CHECK_THROWS_AS(verify_prune_equivalence(a, b, {}), InvalidInput);
  auto other = cfg();
  other.vocab_size = 20;
  nn::TransformerModel c(other, 1);
  CHECK_THROWS_AS(verify_prune_equivalence(a, c, probes(3)), ShapeError);
}
