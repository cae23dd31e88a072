// SPDX-License-Identifier: Apache-2.0
//
// Proximal training loop: each step is forward, backward, clip, Adam, then a
// row-wise prox on every regularized matrix with step lr * lambda.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "autosize/datasets.hpp"
#include "autosize/prox.hpp"
#include "autosize/sizing.hpp"
#include "autosize/transformer.hpp"

namespace autosize::train {

struct TrainConfig {
  double learning_rate = 1e-4;
  double lambda = 0.0;
  prox::Norm reg_kind = prox::Norm::L21;
  std::size_t batch_size = 32;
  double grad_clip_norm = 0.1;
  double label_smoothing = 0.1;
  double dropout = 0.1;
  double lr_floor = 1e-5;
  double lr_decay_factor = 0.5;
  std::size_t patience = 1;
  std::size_t max_epochs = 20;
  std::uint64_t seed = 1;
  /// Parameters the prox touches; empty means every auto-sized parameter.
  std::set<std::string> regularized;
  /// Disables the prox call outright (reference runs for the lambda = 0 check).
  bool prox_enabled = true;
  std::size_t workers = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct Moments {
  Tensor m;
  Tensor v;
  friend bool operator==(const Moments&, const Moments&) = default;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, Moments> moments;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// "ADAMSTATE1", u64 step, f64 beta1/beta2/eps, u32 count, then per entry
/// name, shape and the float32 m and v values.
std::string serialize_adam(const AdamState& state);
AdamState deserialize_adam(std::string_view bytes);

using ParameterMap = std::map<std::string, nn::Parameter>;

/// Rescales all gradients so their global l2 norm is at most max_norm.
/// Returns the norm before clipping; throws DivergenceError on non-finite gradients.
double clip_grad_norm(ParameterMap& params, double max_norm);

/// Bias-corrected Adam; throws DivergenceError if an update is non-finite.
void adam_step(ParameterMap& params, AdamState& state, double lr);

struct StepMetrics {
  double loss = 0.0;
  double grad_norm = 0.0;
  std::size_t tokens = 0;
};

/// One alternation step at learning rate `lr`.
StepMetrics train_step(nn::TransformerModel& model, const nn::TokenBatch& batch, const TrainConfig& config,
                       AdamState& adam, double lr, std::mt19937_64& rng);

/// Applies the prox to every regularized parameter; no-op when lambda is 0.
void apply_prox(nn::TransformerModel& model, const TrainConfig& config, double lr);

/// Reduce-on-plateau: after `patience` epochs without a strictly better dev
/// loss the rate is multiplied by `decay`; training stops below `floor`.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, double decay, std::size_t patience, double floor);
  /// Returns true when `dev_loss` is a new best.
  bool observe(double dev_loss);
  double lr() const { return lr_; }
  bool stopped() const { return lr_ < floor_; }

 private:
  double lr_;
  double decay_;
  std::size_t patience_;
  double floor_;
  double best_;
  std::size_t bad_epochs_ = 0;
};

struct EvalResult {
  double loss = 0.0;
  double perplexity = 0.0;
  double sequence_accuracy = 0.0;
  std::size_t tokens = 0;
};

struct EvalOptions {
  double label_smoothing = 0.1;
  std::size_t batch_size = 64;
  bool decode = true;
};

/// Dropout off. perplexity = exp(mean unsmoothed NLL); accuracy from greedy decoding.
EvalResult evaluate(nn::TransformerModel& model, const std::vector<data::SentencePair>& pairs,
                    const EvalOptions& options = {});

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_perplexity = 0.0;
  std::vector<std::pair<std::string, sizing::RowCount>> rows_deleted;
  double seconds = 0.0;
};

struct TrainResult {
  nn::TransformerModel best_model;
  std::size_t best_epoch = 0;
  double best_dev_loss = 0.0;
  std::vector<EpochRecord> history;
  AdamState adam;
  double final_lr = 0.0;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Throws ConfigError for empty splits and DivergenceError on a non-finite loss.
TrainResult train_loop(nn::TransformerModel model, const std::vector<data::SentencePair>& train,
                       const std::vector<data::SentencePair>& dev, const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

}  // namespace autosize::train
