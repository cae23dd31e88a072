// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "autosize/errors.hpp"
#include "autosize/transformer.hpp"
#include "nn_oracles.hpp"

using namespace autosize;
using namespace autosize::nn;

namespace {

template <typename T>
BasicParameter<T> make_param(const std::string& id, Shape shape, std::vector<T> values) {
  return BasicParameter<T>(id, BasicTensor<T>(std::move(shape), std::move(values)), false);
}

ModelConfig small_config() {
  ModelConfig c;
  c.d_model = 16;
  c.heads = 2;
  c.ffn_dims = {24, 24};
  c.vocab_size = 13;
  c.max_len = 10;
  return c;
}

bool all_finite(const Tensor& t) {
  for (float v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("ffn hand-evaluated example") {
  Tape<double> tape;
  auto x = tape.constant(BasicTensor<double>({1, 1}, {1.0}));
  auto w1 = tape.constant(BasicTensor<double>({1, 1}, {2.0}));
  auto b1 = tape.constant(BasicTensor<double>({1}, {-1.0}));
  auto w2 = tape.constant(BasicTensor<double>({1, 1}, {3.0}));
  auto b2 = tape.constant(BasicTensor<double>({1}, {0.0}));
  CHECK(ffn_forward(x, w1, b1, w2, b2).value()[0] == 3.0);
}

TEST_CASE("ffn dead hidden layer outputs b2") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  Tape<double> tape;
  BasicTensor<double> xv({5, 4});
  for (auto& v : xv.values()) v = n01(rng);
  BasicTensor<double> w2v({4, 6});
  for (auto& v : w2v.values()) v = n01(rng);
  const std::vector<double> c{0.5, -1.0, 2.0, 0.25};
  auto y = ffn_forward(tape.constant(xv), tape.constant(BasicTensor<double>({6, 4})),
                       tape.constant(BasicTensor<double>({6})), tape.constant(w2v),
                       tape.constant(BasicTensor<double>({4}, c)));
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(y.value().at(r, j) == c[j]);
  }

  SUBCASE("all-negative pre-activations") {
    Tape<double> t2;
    auto w1 = t2.constant(BasicTensor<double>({2, 1}, {1.0, 1.0}));
    auto b1 = t2.constant(BasicTensor<double>({2}, {-5.0, -5.0}));
    auto out = ffn_forward(t2.constant(BasicTensor<double>({3, 1}, {1.0, 2.0, -3.0})), w1, b1,
                           t2.constant(BasicTensor<double>({1, 2}, {4.0, 7.0})),
                           t2.constant(BasicTensor<double>({1}, {0.75})));
    for (double v : out.value().values()) CHECK(v == 0.75);
  }
}

TEST_CASE("ffn shape mismatch") {
  Tape<float> tape;
  auto x = tape.constant(Tensor({2, 4}));
  CHECK_THROWS_AS(ffn_forward(x, tape.constant(Tensor({3, 4})), tape.constant(Tensor({3})),
                              tape.constant(Tensor({4, 5})), tape.constant(Tensor({4}))),
                  ShapeError);
  CHECK_THROWS_AS(ffn_forward(x, tape.constant(Tensor({3, 5})), tape.constant(Tensor({3})),
                              tape.constant(Tensor({4, 3})), tape.constant(Tensor({4}))),
                  ShapeError);
}

TEST_CASE("attention degenerate cases") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  auto random = [&](Shape s) {
    BasicTensor<double> t(std::move(s));
    for (auto& v : t.values()) v = n01(rng);
    return t;
  };
  const std::size_t d = 4;
  const std::vector<std::size_t> one{1};

  SUBCASE("single position") {
    Tape<double> tape;
    AttentionParams<double> ps{tape.constant(random({d, d})), tape.constant(random({d})),
                               tape.constant(random({d, d})), tape.constant(random({d})),
                               tape.constant(random({d, d})), tape.constant(random({d})),
                               tape.constant(random({d, d})), tape.constant(random({d}))};
    auto q = tape.constant(random({1, d}));
    const auto mask = AttentionMask::from_lengths(1, 1, 1, one, false);
    auto y = multi_head_attention(q, q, q, mask, ps, 1);
    auto expected = linear(linear(q, ps.wv, ps.bv), ps.wo, ps.bo);
    for (std::size_t j = 0; j < d; ++j) CHECK(y.value()[j] == doctest::Approx(expected.value()[j]).epsilon(1e-12));
  }

  SUBCASE("zero value projection yields the output bias") {
    Tape<double> tape;
    const auto bo = random({d});
    AttentionParams<double> ps{tape.constant(random({d, d})), tape.constant(random({d})),
                               tape.constant(random({d, d})), tape.constant(random({d})),
                               tape.constant(BasicTensor<double>({d, d})), tape.constant(BasicTensor<double>({d})),
                               tape.constant(random({d, d})), tape.constant(bo)};
    const std::vector<std::size_t> lens{3, 2};
    const auto mask = AttentionMask::from_lengths(2, 3, 3, lens, true);
    auto x = tape.constant(random({6, d}));
    auto y = multi_head_attention(x, x, x, mask, ps, 2);
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t j = 0; j < d; ++j) CHECK(y.value().at(r, j) == doctest::Approx(bo[j]).epsilon(1e-12));
    }
  }

  SUBCASE("heads must divide features") {
    Tape<double> tape;
    auto x = tape.constant(random({1, d}));
    const auto mask = AttentionMask::from_lengths(1, 1, 1, one, false);
    CHECK_THROWS_AS(attention_core(x, x, x, 3, mask), ShapeError);
  }
}

TEST_CASE("backward basics") {
  auto p = make_param<double>("w", {2, 3}, {1, 2, 3, 4, 5, 6});
  auto unused = make_param<double>("u", {2}, {7, 8});
  unused.grad.fill(5.0);
  {
    Tape<double> tape;
    auto loss = sum(tape.param(p));
    tape.param(unused);
    tape.backward(loss);
    for (double g : p.grad.values()) CHECK(g == 1.0);
    for (double g : unused.grad.values()) CHECK(g == 0.0);
  }

  SUBCASE("accumulation resets between passes") {
    for (int pass = 0; pass < 3; ++pass) {
      Tape<double> tape;
      auto loss = sum(scale(tape.param(p), 2.0));
      tape.backward(loss);
    }
    for (double g : p.grad.values()) CHECK(g == 2.0);
  }

  SUBCASE("usage errors") {
    Tape<double> tape;
    CHECK_THROWS_AS(tape.backward(Var<double>{}), UsageError);
    auto loss = sum(tape.param(p));
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), UsageError);
    Tape<double> eval(false);
    auto l2 = sum(eval.param(p));
    CHECK_THROWS_AS(eval.backward(l2), UsageError);
    Tape<double> t3;
    CHECK_THROWS_AS(t3.backward(t3.param(p)), UsageError);
  }
}

TEST_CASE("label smoothing") {
  const std::size_t V = 4;
  SUBCASE("uniform logits give log V") {
    for (double eps : {0.0, 0.1, 0.5}) {
      Tape<double> tape;
      auto logits = tape.constant(BasicTensor<double>({3, V}, std::vector<double>(3 * V, 0.7)));
      const std::vector<int> targets{1, 3, 2};
      CHECK(label_smoothed_nll(logits, targets, eps).value()[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    }
  }

  SUBCASE("direct summation oracle") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    BasicTensor<double> lv({5, V});
    for (auto& v : lv.values()) v = 3 * n01(rng);
    lv.at(0, 1) = 40.0;  // near one-hot row
    const std::vector<int> targets{1, 0, 3, 0, 2};
    for (double eps : {0.0, 0.1}) {
      double total = 0.0;
      std::size_t count = 0;
      for (std::size_t r = 0; r < 5; ++r) {
        if (targets[r] == 0) continue;
        double z = 0.0;
        for (std::size_t j = 0; j < V; ++j) z += std::exp(lv.at(r, j));
        for (std::size_t j = 0; j < V; ++j) {
          const double q = (1 - eps) * (static_cast<int>(j) == targets[r] ? 1.0 : 0.0) + eps / V;
          total -= q * (lv.at(r, j) - std::log(z));
        }
        ++count;
      }
      Tape<double> tape;
      auto loss = label_smoothed_nll(tape.constant(lv), targets, eps);
      CHECK(loss.value()[0] == doctest::Approx(total / count).epsilon(1e-12));
      const auto stats = nll_stats(lv, targets, eps);
      CHECK(stats.tokens == count);
      CHECK(stats.smoothed_sum / count == doctest::Approx(total / count).epsilon(1e-12));
    }
  }

  SUBCASE("epsilon range") {
    Tape<double> tape;
    auto logits = tape.constant(BasicTensor<double>({1, V}));
    const std::vector<int> t{1};
    CHECK_THROWS_AS(label_smoothed_nll(logits, t, 1.0), InvalidInput);
    CHECK_THROWS_AS(label_smoothed_nll(logits, t, -0.1), InvalidInput);
  }
}

TEST_CASE("full model gradient matches finite differences") {
  const auto r = autosize::testing::transformer_grad_check(2024, 6);
  INFO("worst coordinate " << r.worst);
  CHECK(r.coordinates >= 200);
  CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("config validation and canonical text") {
  auto c = small_config();
  c.bypassed = {"enc.0.ffn"};
  c.ffn_dims = {0, 24};
  c.dropout = 0.1;
  const auto text = c.to_canonical_text();
  CHECK(text.rfind("bypassed=enc.0.ffn\n", 0) == 0);
  CHECK(ModelConfig::from_canonical_text(text) == c);

  auto bad = small_config();
  bad.heads = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = small_config();
  bad.ffn_dims = {24};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = small_config();
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = small_config();
  bad.bypassed = {"enc.7.ffn"};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(ModelConfig::from_canonical_text("d_model=8\n"), FormatError);
}

TEST_CASE("parameter layout") {
  const auto layout = parameter_layout(small_config());
  std::size_t sized = 0;
  for (const auto& [id, spec] : layout) {
    if (spec.auto_sized) {
      ++sized;
      CHECK(spec.shape.size() == 2);
      CHECK(id.find("embed") == std::string::npos);
      CHECK(id.find(".ln") == std::string::npos);
    }
  }
  // enc: 4 self-attn + 2 ffn; dec: 4 self + 4 cross + 2 ffn
  CHECK(sized == 16);
  CHECK(layout.at("enc.0.ffn.W1").shape == Shape{24, 16});
  CHECK(layout.at("dec.0.ffn.W2").shape == Shape{16, 24});
}

TEST_CASE("model forward contracts") {
  const auto cfg = small_config();
  TransformerModel a(cfg, 9), b(cfg, 9);
  const std::vector<int> src{3, 4, 5, 6, 7};
  const std::vector<int> prefix{kBos, 7, 6};
  const auto la = model_forward(a, src, prefix);
  CHECK(la.shape() == Shape{3, cfg.vocab_size});
  CHECK(la == model_forward(b, src, prefix));
  CHECK(la == model_forward(a, src, prefix));

  const std::vector<int> bad_token{3, 40};
  CHECK_THROWS_AS(model_forward(a, bad_token, prefix), InvalidInput);
  const std::vector<int> too_long(cfg.max_len + 1, 5);
  CHECK_THROWS_AS(model_forward(a, too_long, prefix), InvalidInput);

  SUBCASE("shape stability") {
    TransformerModel c(cfg, 123);
    for (auto& [id, p] : c.parameters()) p.value.fill(0.0f);
    CHECK(model_forward(c, src, prefix).shape() == la.shape());
  }
}

TEST_CASE("zeroed auto-sized parameters keep the residual path alive") {
  const auto cfg = small_config();
  TransformerModel m(cfg, 4);
  for (auto& [id, p] : m.parameters()) {
    if (p.auto_sized) p.value.fill(0.0f);
  }
  const std::vector<std::vector<int>> src{{3, 4, 5}, {6, 7, 8, 9}};
  const std::vector<std::vector<int>> tgt{{5, 4, 3}, {9, 8}};
  const auto batch = make_batch(src, tgt);
  Tape<float> tape;
  auto logits = m.forward(tape, batch);
  CHECK(all_finite(logits.value()));
  auto loss = label_smoothed_nll(logits, batch.tgt_out, 0.1f);
  tape.backward(loss);
  // With cross-attention zeroed the source side is disconnected from the loss.
  double norm = 0.0;
  for (float g : m.param("tgt_embed").grad.values()) norm += std::abs(g);
  CHECK(norm > 0.0);
}

TEST_CASE("bypassed and hidden-free sublayers") {
  auto cfg = small_config();
  cfg.ffn_dims = {0, 24};
  cfg.bypassed = {"enc.0.ffn", "dec.0.cross_attn"};
  TransformerModel m(cfg, 1);
  CHECK_FALSE(m.has_param("enc.0.ffn.W1"));
  CHECK_FALSE(m.has_param("enc.0.ffn.b2"));
  CHECK_FALSE(m.has_param("dec.0.cross_attn.Wq"));
  const std::vector<int> src{3, 4};
  const std::vector<int> prefix{kBos};
  CHECK(all_finite(model_forward(m, src, prefix)));

  cfg.bypassed = {};
  TransformerModel keep_b2(cfg, 1);
  CHECK(keep_b2.has_param("enc.0.ffn.b2"));
  CHECK(all_finite(model_forward(keep_b2, src, prefix)));
}

TEST_CASE("greedy decode") {
  const auto cfg = small_config();
  TransformerModel m(cfg, 2);
  const std::vector<int> src{3, 4, 5};
  SUBCASE("eos-favoring output layer") {
    m.param("out.W").value.fill(0.0f);
    auto& b = m.param("out.b").value;
    b.fill(0.0f);
    b[kEos] = 10.0f;
    CHECK(greedy_decode(m, src, 8).empty());
  }
  SUBCASE("length bound") {
    m.param("out.W").value.fill(0.0f);
    auto& b = m.param("out.b").value;
    b.fill(0.0f);
    b[7] = 10.0f;
    for (std::size_t len : {0u, 1u, 4u, 30u}) {
      const auto out = greedy_decode(m, src, len);
      CHECK(out.size() <= len);
      for (int t : out) CHECK(t == 7);
    }
  }
  SUBCASE("batched decode matches single decode") {
    const std::vector<std::vector<int>> sources{{3, 4, 5}, {9, 8, 7, 6, 5}, {4}};
    const auto batched = greedy_decode_batch(m, sources, 6);
    for (std::size_t i = 0; i < sources.size(); ++i) CHECK(batched[i] == greedy_decode(m, sources[i], 6));
  }
}

TEST_CASE("make_batch framing") {
  const std::vector<std::vector<int>> src{{5, 9, 3}, {4}};
  const std::vector<std::vector<int>> tgt{{5, 9, 3}, {4}};
  const auto b = make_batch(src, tgt);
  CHECK(b.tgt_len == 4);
  CHECK(b.tgt_in == std::vector<int>{kBos, 5, 9, 3, kBos, 4, kPad, kPad});
  CHECK(b.tgt_out == std::vector<int>{5, 9, 3, kEos, 4, kEos, kPad, kPad});
  CHECK(b.src == std::vector<int>{5, 9, 3, 4, kPad, kPad});
  CHECK(b.src_lengths == std::vector<std::size_t>{3, 1});
}

TEST_CASE("precision cast preserves values") {
  TransformerModel m(small_config(), 6);
  const auto d = m.cast<double>();
  const auto back = d.cast<float>();
  for (const auto& [id, p] : m.parameters()) CHECK(back.param(id).value == p.value);
}
