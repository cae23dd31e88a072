// SPDX-License-Identifier: Apache-2.0
#include "autosize/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "autosize/binary_io.hpp"
#include "autosize/errors.hpp"

namespace autosize::train {

namespace {

constexpr std::string_view kAdamMagic = "ADAMSTATE1";

bool finite_in(double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; }

void write_tensor(io::ByteWriter& w, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (float v : t.values()) w.f32(v);
}

Tensor read_tensor(io::ByteReader& r) {
  const auto rank = r.u32();
  if (rank == 0 || rank > 2) throw FormatError("adam state: unsupported tensor rank");
  Shape shape;
  std::size_t n = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape.push_back(r.u32());
    if (shape.back() == 0) throw FormatError("adam state: zero dimension");
    n *= shape.back();
  }
  if (r.remaining() / 4 < n) throw FormatError("adam state: truncated tensor");
  std::vector<float> data(n);
  for (auto& v : data) v = r.f32();
  return Tensor(std::move(shape), std::move(data));
}

bool in_scope(const TrainConfig& config, const nn::Parameter& p) {
  return p.auto_sized && (config.regularized.empty() || config.regularized.count(p.id));
}

}  // namespace

void TrainConfig::validate() const {
  if (!(std::isfinite(learning_rate) && learning_rate > 0)) throw ConfigError("train: learning_rate must be positive");
  if (!(std::isfinite(lr_floor) && lr_floor > 0)) throw ConfigError("train: lr_floor must be positive");
  if (!(learning_rate > lr_floor)) throw ConfigError("train: learning_rate must exceed lr_floor at start");
  if (!finite_in(lambda, 0.0, std::numeric_limits<double>::max())) throw ConfigError("train: lambda must be finite and >= 0");
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (!(std::isfinite(grad_clip_norm) && grad_clip_norm > 0)) throw ConfigError("train: grad_clip_norm must be positive");
  if (!(finite_in(label_smoothing, 0.0, 1.0) && label_smoothing < 1.0)) {
    throw ConfigError("train: label_smoothing must lie in [0, 1)");
  }
  if (!(finite_in(dropout, 0.0, 1.0) && dropout < 1.0)) throw ConfigError("train: dropout must lie in [0, 1)");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) throw ConfigError("train: lr_decay_factor must lie in (0, 1)");
  if (patience == 0) throw ConfigError("train: patience must be at least 1");
  if (max_epochs == 0) throw ConfigError("train: max_epochs must be at least 1");
  if (workers == 0) throw ConfigError("train: workers must be at least 1");
}

std::string serialize_adam(const AdamState& state) {
  io::ByteWriter w;
  w.raw(kAdamMagic);
  w.u64(state.step);
  w.f64(state.beta1);
  w.f64(state.beta2);
  w.f64(state.eps);
  w.u32(static_cast<std::uint32_t>(state.moments.size()));
  for (const auto& [id, mom] : state.moments) {
    w.str(id);
    write_tensor(w, mom.m);
    write_tensor(w, mom.v);
  }
  return w.take();
}

AdamState deserialize_adam(std::string_view bytes) {
  io::ByteReader r(bytes, "adam state");
  if (bytes.size() < kAdamMagic.size() || r.raw(kAdamMagic.size()) != kAdamMagic) {
    throw FormatError("adam state: bad magic string (expected ADAMSTATE1)");
  }
  AdamState s;
  s.step = r.u64();
  s.beta1 = r.f64();
  s.beta2 = r.f64();
  s.eps = r.f64();
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto id = r.str();
    Moments mom;
    mom.m = read_tensor(r);
    mom.v = read_tensor(r);
    if (mom.m.shape() != mom.v.shape()) throw FormatError("adam state: moment shapes differ for " + id);
    s.moments.emplace(std::move(id), std::move(mom));
  }
  if (!r.at_end()) throw FormatError("adam state: trailing bytes");
  return s;
}

double clip_grad_norm(ParameterMap& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [id, p] : params) {
    for (float g : p.grad.values()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw DivergenceError("gradient norm is not finite");
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [id, p] : params) {
      for (auto& g : p.grad.values()) g = static_cast<float>(g * s);
    }
  }
  return norm;
}

void adam_step(ParameterMap& params, AdamState& state, double lr) {
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [id, p] : params) {
    auto it = state.moments.find(id);
    if (it == state.moments.end()) {
      it = state.moments.emplace(id, Moments{Tensor(p.value.shape()), Tensor(p.value.shape())}).first;
    } else if (it->second.m.shape() != p.value.shape()) {
      throw ShapeError("adam: moment shape for " + id + " does not match the parameter");
    }
    auto& m = it->second.m;
    auto& v = it->second.v;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + state.eps);
      if (!std::isfinite(update)) throw DivergenceError("adam: non-finite update for " + id);
      p.value[i] = static_cast<float>(p.value[i] - update);
    }
  }
}

void apply_prox(nn::TransformerModel& model, const TrainConfig& config, double lr) {
  if (!config.prox_enabled || config.lambda == 0.0) return;
  const prox::RegularizerKind reg(config.reg_kind, config.lambda);
  const auto step = prox::ProxStepSize::from(lr, config.lambda);
  scan::ScanOptions options;
  options.workers = config.workers;
  for (auto& [id, p] : model.parameters()) {
    if (in_scope(config, p)) prox::prox_step_in_place(p.value, reg, step, options);
  }
  sizing::couple_ffn_biases(model);
}

StepMetrics train_step(nn::TransformerModel& model, const nn::TokenBatch& batch, const TrainConfig& config,
                       AdamState& adam, double lr, std::mt19937_64& rng) {
  model.zero_grad();
  nn::Tape<float> tape;
  nn::ForwardOptions fo;
  fo.train = true;
  fo.rng = &rng;
  fo.dropout = config.dropout;
  auto logits = model.forward(tape, batch, fo);
  auto loss = nn::label_smoothed_nll(logits, batch.tgt_out, static_cast<float>(config.label_smoothing));
  StepMetrics m;
  m.loss = loss.value()[0];
  if (!std::isfinite(m.loss)) throw DivergenceError("training loss became non-finite");
  for (auto n : batch.tgt_lengths) m.tokens += n;
  tape.backward(loss);
  m.grad_norm = clip_grad_norm(model.parameters(), config.grad_clip_norm);
  adam_step(model.parameters(), adam, lr);
  apply_prox(model, config, lr);
  return m;
}

PlateauSchedule::PlateauSchedule(double lr, double decay, std::size_t patience, double floor)
    : lr_(lr), decay_(decay), patience_(patience), floor_(floor), best_(std::numeric_limits<double>::infinity()) {
  if (!(decay > 0.0 && decay < 1.0) || patience == 0) throw ConfigError("schedule: bad decay or patience");
}

bool PlateauSchedule::observe(double dev_loss) {
  if (dev_loss < best_) {
    best_ = dev_loss;
    bad_epochs_ = 0;
    return true;
  }
  if (++bad_epochs_ >= patience_) {
    lr_ *= decay_;
    bad_epochs_ = 0;
  }
  return false;
}

EvalResult evaluate(nn::TransformerModel& model, const std::vector<data::SentencePair>& pairs,
                    const EvalOptions& options) {
  if (pairs.empty()) throw InvalidInput("evaluate: empty dataset");
  double smoothed = 0.0, nll = 0.0;
  std::size_t tokens = 0, correct = 0;
  const std::size_t decode_len = model.config().max_len - 1;
  for (const auto& batch : data::ordered_batches(pairs, options.batch_size)) {
    nn::Tape<float> tape(false);
    const auto stats =
        nn::nll_stats(model.forward(tape, batch.tokens).value(), batch.tokens.tgt_out, options.label_smoothing);
    smoothed += stats.smoothed_sum;
    nll += stats.nll_sum;
    tokens += stats.tokens;
    if (options.decode) {
      std::vector<std::vector<int>> sources;
      for (auto i : batch.indices) sources.push_back(pairs[i].source);
      const auto hyps = nn::greedy_decode_batch(model, sources, decode_len);
      for (std::size_t k = 0; k < hyps.size(); ++k) correct += hyps[k] == pairs[batch.indices[k]].target;
    }
  }
  EvalResult r;
  r.tokens = tokens;
  r.loss = smoothed / static_cast<double>(tokens);
  r.perplexity = std::exp(nll / static_cast<double>(tokens));
  r.sequence_accuracy = options.decode ? static_cast<double>(correct) / static_cast<double>(pairs.size()) : 0.0;
  return r;
}

TrainResult train_loop(nn::TransformerModel model, const std::vector<data::SentencePair>& train,
                       const std::vector<data::SentencePair>& dev, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw ConfigError("train: training set is empty");
  if (dev.empty()) throw ConfigError("train: dev set is empty");
  for (const auto& id : config.regularized) {
    if (!model.has_param(id) || !model.param(id).auto_sized) {
      throw ConfigError("train: '" + id + "' is not an auto-sized parameter of this model");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  std::set<std::string> scope = config.regularized;
  if (scope.empty()) {
    for (const auto& [id, p] : model.parameters()) {
      if (p.auto_sized) scope.insert(id);
    }
  }

  TrainResult result;
  result.best_dev_loss = std::numeric_limits<double>::infinity();
  PlateauSchedule schedule(config.learning_rate, config.lr_decay_factor, config.patience, config.lr_floor);
  std::mt19937_64 dropout_rng(config.seed ^ 0xd1b54a32d192ed03ull);
  EvalOptions eval;
  eval.label_smoothing = config.label_smoothing;
  eval.decode = false;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = schedule.lr();
    double loss_sum = 0.0;
    std::size_t token_sum = 0;
    const auto epoch_seed = config.seed * 0x9e3779b97f4a7c15ull + epoch;
    for (const auto& batch : data::batch_iterator(train, config.batch_size, epoch_seed)) {
      const auto m = train_step(model, batch.tokens, config, result.adam, rec.lr, dropout_rng);
      loss_sum += m.loss * static_cast<double>(m.tokens);
      token_sum += m.tokens;
    }
    rec.train_loss = loss_sum / static_cast<double>(token_sum);
    const auto dev_eval = evaluate(model, dev, eval);
    rec.dev_loss = dev_eval.loss;
    rec.dev_perplexity = dev_eval.perplexity;
    rec.rows_deleted = sizing::component_census(sizing::sizing_report(model, 0.0, &scope));
    if (!std::isfinite(rec.dev_loss)) throw DivergenceError("dev loss became non-finite at epoch " + std::to_string(epoch));
    if (schedule.observe(rec.dev_loss)) {
      result.best_model = model;
      result.best_epoch = epoch;
      result.best_dev_loss = rec.dev_loss;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (schedule.stopped()) break;
  }
  result.final_lr = schedule.lr();
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace autosize::train
