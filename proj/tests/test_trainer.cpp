// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "autosize/errors.hpp"
#include "autosize/trainer.hpp"

using namespace autosize;
using namespace autosize::train;

namespace {

nn::ModelConfig tiny_model() {
  nn::ModelConfig c;
  c.d_model = 16;
  c.heads = 2;
  c.ffn_dims = {24, 24};
  c.vocab_size = 16;
  c.max_len = 8;
  return c;
}

data::Corpus tiny_corpus() {
  data::CorpusConfig c;
  c.vocab_size = 16;
  c.min_len = 2;
  c.max_len = 5;
  c.train_size = 96;
  c.dev_size = 24;
  c.test_size = 24;
  c.seed = 4;
  return data::generate_corpus(c);
}

ParameterMap grads_with(std::vector<std::vector<float>> gs) {
  ParameterMap m;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const std::string id = "p" + std::to_string(i);
    nn::Parameter p(id, Tensor({gs[i].size()}), false);
    p.grad = Tensor({gs[i].size()}, gs[i]);
    m.emplace(id, std::move(p));
  }
  return m;
}

double global_norm(const ParameterMap& m) {
  double s = 0.0;
  for (const auto& [id, p] : m) {
    for (float g : p.grad.values()) s += static_cast<double>(g) * g;
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("clip_grad_norm") {
  auto small = grads_with({{0.03f, 0.0f}, {0.04f}});
  CHECK(clip_grad_norm(small, 0.1) == doctest::Approx(0.05));
  CHECK(small.at("p0").grad[0] == 0.03f);
  CHECK(small.at("p1").grad[0] == 0.04f);

  auto big = grads_with({{0.6f}, {0.8f, 0.0f}});
  CHECK(clip_grad_norm(big, 0.1) == doctest::Approx(1.0));
  CHECK(big.at("p0").grad[0] == doctest::Approx(0.06));
  CHECK(global_norm(big) == doctest::Approx(0.1).epsilon(1e-6));

  auto zero = grads_with({{0.0f, 0.0f}});
  CHECK(clip_grad_norm(zero, 0.1) == 0.0);
  CHECK(zero.at("p0").grad[0] == 0.0f);

  auto bad = grads_with({{NAN}});
  CHECK_THROWS_AS(clip_grad_norm(bad, 0.1), DivergenceError);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters and moments at zero") {
    auto m = grads_with({{0.0f, 0.0f}});
    m.at("p0").value = Tensor({2}, {1.5f, -2.0f});
    AdamState s;
    adam_step(m, s, 1e-3);
    CHECK(m.at("p0").value[0] == 1.5f);
    CHECK(m.at("p0").value[1] == -2.0f);
    CHECK(s.moments.at("p0").m[0] == 0.0f);
    CHECK(s.moments.at("p0").v[1] == 0.0f);
    CHECK(s.step == 1);
  }

  SUBCASE("constant gradient converges to -lr * sign(g)") {
    auto m = grads_with({{0.37f, -2.5f, 1e-3f}});
    AdamState s;
    const double lr = 1e-3;
    std::vector<float> before;
    for (int step = 0; step < 1000; ++step) {
      before.assign(m.at("p0").value.values().begin(), m.at("p0").value.values().end());
      adam_step(m, s, lr);
    }
    const std::vector<double> sign{1, -1, 1};
    for (std::size_t i = 0; i < 3; ++i) {
      const double update = static_cast<double>(m.at("p0").value[i]) - before[i];
      CHECK(update == doctest::Approx(-lr * sign[i]).epsilon(1e-3));
    }
  }

  SUBCASE("state serialization round trip") {
    auto m = grads_with({{0.1f, -0.2f}, {0.3f}});
    AdamState s;
    adam_step(m, s, 1e-3);
    adam_step(m, s, 1e-3);
    const auto bytes = serialize_adam(s);
    CHECK(deserialize_adam(bytes) == s);
    CHECK(serialize_adam(deserialize_adam(bytes)) == bytes);
    CHECK_THROWS_AS(deserialize_adam("ADAMSTATE2" + bytes.substr(10)), FormatError);
  }

  SUBCASE("non-finite update") {
    auto m = grads_with({{1.0f}});
    AdamState s;
    CHECK_THROWS_AS(adam_step(m, s, INFINITY), DivergenceError);
  }
}

TEST_CASE("overwhelming lambda zeroes every auto-sized row in one step") {
  const auto corpus = tiny_corpus();
  nn::TransformerModel model(tiny_model(), 8);
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.lambda = 1e6;
  AdamState adam;
  std::mt19937_64 rng(1);
  const auto batches = data::batch_iterator(corpus.train, 16, 1);
  train_step(model, batches[0].tokens, tc, adam, tc.learning_rate, rng);
  const auto report = sizing::sizing_report(model);
  CHECK(report.rows_deleted() == report.rows_total());
  CHECK(report.params_nonzero == 0);

  tc.lambda = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto m = train_step(model, batches[1 + i].tokens, tc, adam, tc.learning_rate, rng);
    CHECK(std::isfinite(m.loss));
  }
}

TEST_CASE("prox never increases the regularizer and shrinks entrywise") {
  const auto corpus = tiny_corpus();
  for (auto norm : {prox::Norm::L21, prox::Norm::LInf1}) {
    nn::TransformerModel model(tiny_model(), 2);
    TrainConfig tc;
    tc.learning_rate = 1e-2;
    tc.lambda = 1.0;
    tc.reg_kind = norm;
    tc.dropout = 0.0;
    AdamState adam;
    for (const auto& batch : data::batch_iterator(corpus.train, 16, 3)) {
      model.zero_grad();
      nn::Tape<float> tape;
      auto loss = nn::label_smoothed_nll(model.forward(tape, batch.tokens), batch.tokens.tgt_out, 0.1f);
      tape.backward(loss);
      clip_grad_norm(model.parameters(), tc.grad_clip_norm);
      adam_step(model.parameters(), adam, tc.learning_rate);
      std::map<std::string, Tensor> before;
      for (const auto& [id, p] : model.parameters()) {
        if (p.auto_sized) before.emplace(id, p.value);
      }
      apply_prox(model, tc, tc.learning_rate);
      const prox::RegularizerKind reg(norm, tc.lambda);
      for (const auto& [id, w] : before) {
        const auto& after = model.param(id).value;
        REQUIRE(prox::regularizer_value(after, reg) <= prox::regularizer_value(w, reg) + 1e-9);
        for (std::size_t i = 0; i < w.size(); ++i) REQUIRE(std::abs(after[i]) <= std::abs(w[i]));
      }
    }
  }
}

TEST_CASE("training is deterministic and lambda = 0 matches a prox-free run") {
  const auto corpus = tiny_corpus();
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.lr_floor = 1e-5;
  tc.max_epochs = 2;
  tc.batch_size = 16;
  auto a = train_loop(nn::TransformerModel(tiny_model(), 5), corpus.train, corpus.dev, tc);
  auto b = train_loop(nn::TransformerModel(tiny_model(), 5), corpus.train, corpus.dev, tc);
  tc.prox_enabled = false;
  auto c = train_loop(nn::TransformerModel(tiny_model(), 5), corpus.train, corpus.dev, tc);
  for (const auto& [id, p] : a.best_model.parameters()) {
    CHECK(b.best_model.param(id).value == p.value);
    CHECK(c.best_model.param(id).value == p.value);
  }
  CHECK(a.history.size() <= tc.max_epochs);
}

TEST_CASE("plateau schedule arithmetic") {
  PlateauSchedule s(1e-4, 0.5, 1, 1e-5);
  CHECK(s.observe(1.0));
  std::vector<double> lrs{s.lr()};
  while (!s.stopped()) {
    s.observe(2.0);
    lrs.push_back(s.lr());
  }
  const std::vector<double> expect{1e-4, 5e-5, 2.5e-5, 1.25e-5, 6.25e-6};
  REQUIRE(lrs.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(lrs[i] == doctest::Approx(expect[i]).epsilon(1e-12));

  PlateauSchedule p2(1.0, 0.5, 2, 0.1);
  p2.observe(1.0);
  p2.observe(1.0);
  CHECK(p2.lr() == 1.0);
  p2.observe(1.0);
  CHECK(p2.lr() == 0.5);
}

TEST_CASE("train_loop validation") {
  const auto corpus = tiny_corpus();
  TrainConfig tc;
  CHECK_THROWS_AS(train_loop(nn::TransformerModel(tiny_model(), 1), corpus.train, {}, tc), ConfigError);
  tc.learning_rate = 1e-6;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.regularized = {"enc.0.ln1.gamma"};
  CHECK_THROWS_AS(train_loop(nn::TransformerModel(tiny_model(), 1), corpus.train, corpus.dev, tc), ConfigError);
}

TEST_CASE("evaluate") {
  const auto corpus = tiny_corpus();
  SUBCASE("uniform model has perplexity V") {
    nn::TransformerModel m(tiny_model(), 1);
    m.param("out.W").value.fill(0.0f);
    m.param("out.b").value.fill(0.0f);
    const auto r = evaluate(m, corpus.dev);
    CHECK(r.perplexity == doctest::Approx(16.0).epsilon(1e-5));
    CHECK(r.loss == doctest::Approx(std::log(16.0)).epsilon(1e-5));
  }

  SUBCASE("perplexity matches per-token summation") {
    nn::TransformerModel m(tiny_model(), 7);
    double nll = 0.0;
    std::size_t tokens = 0;
    for (const auto& p : corpus.dev) {
      std::vector<int> prefix{nn::kBos};
      prefix.insert(prefix.end(), p.target.begin(), p.target.end());
      std::vector<int> gold = p.target;
      gold.push_back(nn::kEos);
      const auto logits = nn::model_forward(m, p.source, prefix);
      for (std::size_t t = 0; t < gold.size(); ++t) {
        double mx = -1e300, z = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) mx = std::max(mx, static_cast<double>(logits.at(t, j)));
        for (std::size_t j = 0; j < logits.cols(); ++j) z += std::exp(logits.at(t, j) - mx);
        nll -= logits.at(t, gold[t]) - mx - std::log(z);
        ++tokens;
      }
    }
    const auto r = evaluate(m, corpus.dev);
    CHECK(r.tokens == tokens);
    CHECK(r.perplexity == doctest::Approx(std::exp(nll / tokens)).epsilon(1e-5));
  }

  nn::TransformerModel empty_probe(tiny_model(), 1);
  CHECK_THROWS_AS(evaluate(empty_probe, {}), InvalidInput);
}
