// SPDX-License-Identifier: Apache-2.0
#include "autosize/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <random>
#include <thread>

#include "autosize/checkpoint.hpp"
#include "autosize/errors.hpp"
#include "autosize/hashing.hpp"
#include "autosize/sizing.hpp"

namespace autosize::search {

namespace {

constexpr std::size_t kRetryCap = 1000;

template <typename R>
std::size_t pick(const std::vector<std::size_t>& choices, R& rng) {
  std::uniform_int_distribution<std::size_t> d(0, choices.size() - 1);
  return choices[d(rng)];
}

void check_choices(const std::vector<std::size_t>& v, const char* name) {
  if (v.empty()) throw ConfigError(std::string("search: ") + name + " must not be empty");
  if (std::find(v.begin(), v.end(), 0u) != v.end()) throw ConfigError(std::string("search: ") + name + " contains 0");
}

void run_jobs(std::size_t count, std::size_t concurrency, const std::function<void(std::size_t)>& job) {
  if (concurrency <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < std::min(concurrency, count); ++t) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace

void SearchSpace::validate() const {
  check_choices(heads_choices, "heads_choices");
  check_choices(d_model_choices, "d_model_choices");
  check_choices(encoder_layer_choices, "encoder_layer_choices");
  check_choices(decoder_layer_choices, "decoder_layer_choices");
  check_choices(ffn_dim_choices, "ffn_dim_choices");
  if (trial_budget == 0) throw ConfigError("search: trial_budget must be at least 1");
}

SearchSpace paper_space() {
  SearchSpace s;
  s.heads_choices = {4, 8, 16};
  s.d_model_choices = {128, 256, 512, 1024, 2048};
  s.encoder_layer_choices = {2, 4, 6, 8};
  s.decoder_layer_choices = {2, 4, 6, 8};
  s.ffn_dim_choices = {512, 1024, 2048};
  s.trial_budget = 10;
  return s;
}

SearchSpace desk_space() {
  SearchSpace s;
  s.heads_choices = {2, 4};
  s.d_model_choices = {16, 32, 64};
  s.encoder_layer_choices = {1, 2};
  s.decoder_layer_choices = {1, 2};
  s.ffn_dim_choices = {32, 64, 128};
  s.trial_budget = 6;
  return s;
}

std::uint64_t trial_seed(const SearchSpace& space, std::size_t draw) {
  std::seed_seq seq{static_cast<std::uint32_t>(space.seed), static_cast<std::uint32_t>(space.seed >> 32),
                    static_cast<std::uint32_t>(draw), 0x7121u};
  std::mt19937_64 rng(seq);
  return rng();
}

nn::ModelConfig sample_architecture(const SearchSpace& space, std::size_t draw, const nn::ModelConfig& base) {
  space.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(space.seed), static_cast<std::uint32_t>(space.seed >> 32),
                    static_cast<std::uint32_t>(draw), static_cast<std::uint32_t>(draw >> 32)};
  std::mt19937_64 rng(seq);
  nn::ModelConfig c = base;
  c.bypassed.clear();
  std::size_t tries = 0;
  do {
    if (++tries > kRetryCap) throw ConfigError("search: no (heads, d_model) pair in the space is compatible");
    c.heads = pick(space.heads_choices, rng);
    c.d_model = pick(space.d_model_choices, rng);
  } while (c.d_model % c.heads != 0 || c.d_model % 2 != 0);
  c.encoder_layers = pick(space.encoder_layer_choices, rng);
  c.decoder_layers = pick(space.decoder_layer_choices, rng);
  c.ffn_dims.clear();
  for (std::size_t i = 0; i < c.encoder_layers + c.decoder_layers; ++i) c.ffn_dims.push_back(pick(space.ffn_dim_choices, rng));
  c.validate();
  return c;
}

std::string to_string(Arm arm) {
  switch (arm) {
    case Arm::None:
      return "none";
    case Arm::L21:
      return "l21";
    case Arm::LInf1:
      return "linf1";
  }
  return "none";
}

Arm parse_arm(const std::string& text) {
  if (text == "none") return Arm::None;
  if (text == "l21") return Arm::L21;
  if (text == "linf1") return Arm::LInf1;
  throw FormatError("unknown arm '" + text + "'");
}

TrialRecord run_trial(const SearchSpace& space, std::size_t draw, Arm arm, double lambda, const data::Corpus& corpus,
                      const SearchOptions& options) {
  TrialRecord rec;
  rec.draw = draw;
  rec.arm = arm;
  rec.lambda = arm == Arm::None ? 0.0 : lambda;
  rec.config = sample_architecture(space, draw, options.base);
  const auto seed = trial_seed(space, draw);
  nn::TransformerModel model(rec.config, seed);
  rec.init_checksum = sha1_hex(serialize_model(model));

  auto tc = options.train;
  tc.seed = seed;
  tc.lambda = rec.lambda;
  tc.reg_kind = arm == Arm::LInf1 ? prox::Norm::LInf1 : prox::Norm::L21;
  tc.regularized.clear();
  const auto start = std::chrono::steady_clock::now();
  try {
    auto result = train::train_loop(std::move(model), corpus.train, corpus.dev, tc);
    auto& best = result.best_model;
    train::EvalOptions eo;
    eo.label_smoothing = tc.label_smoothing;
    eo.decode = false;
    rec.best_dev_perplexity = train::evaluate(best, corpus.dev, eo).perplexity;
    eo.decode = true;
    rec.test_sequence_accuracy = train::evaluate(best, corpus.test, eo).sequence_accuracy;
    const auto report = sizing::sizing_report(best);
    rec.rows_total = report.rows_total();
    rec.rows_deleted = report.rows_deleted();
    rec.params = sizing::prune_model(best).model.parameter_count();
    if (options.keep_models) rec.best_model = std::move(best);
  } catch (const DivergenceError& e) {
    rec.diverged = true;
    rec.error = e.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

void rank_trials(std::vector<TrialRecord>& trials) {
  std::stable_sort(trials.begin(), trials.end(), [](const TrialRecord& a, const TrialRecord& b) {
    if (a.diverged != b.diverged) return !a.diverged;
    if (!a.diverged && a.best_dev_perplexity != b.best_dev_perplexity) return a.best_dev_perplexity < b.best_dev_perplexity;
    return a.trial_id < b.trial_id;
  });
}

namespace {

SearchResult run_arms(const SearchSpace& space, const data::Corpus& corpus, const std::vector<std::pair<Arm, double>>& arms,
                      const SearchOptions& options) {
  space.validate();
  const std::size_t n = space.trial_budget * arms.size();
  SearchResult result;
  result.trials.resize(n);
  run_jobs(n, options.concurrency, [&](std::size_t i) {
    const auto& [arm, lambda] = arms[i % arms.size()];
    auto rec = run_trial(space, i / arms.size(), arm, lambda, corpus, options);
    rec.trial_id = i;
    result.trials[i] = std::move(rec);
  });
  for (const auto& t : result.trials) result.cumulative_seconds += t.seconds;
  rank_trials(result.trials);
  return result;
}

}  // namespace

SearchResult random_search(const SearchSpace& space, const data::Corpus& corpus, const SearchOptions& options) {
  return run_arms(space, corpus, {{Arm::None, 0.0}}, options);
}

SearchResult search_with_autosizing(const SearchSpace& space, const data::Corpus& corpus, double lambda_l21,
                                    double lambda_linf, const SearchOptions& options) {
  if (!(lambda_l21 > 0.0) || !(lambda_linf > 0.0)) throw ConfigError("search: both arm lambdas must be positive");
  return run_arms(space, corpus, {{Arm::None, 0.0}, {Arm::L21, lambda_l21}, {Arm::LInf1, lambda_linf}}, options);
}

}  // namespace autosize::search
