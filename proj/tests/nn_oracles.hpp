// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "autosize/transformer.hpp"

namespace autosize::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t parameters_touched = 0;
  std::string worst;
};

inline nn::ModelConfig grad_check_config() {
  nn::ModelConfig c;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.d_model = 8;
  c.heads = 2;
  c.ffn_dims = {12, 12};
  c.vocab_size = 11;
  c.max_len = 8;
  c.dropout = 0.0;
  return c;
}

inline double tiny_loss(nn::BasicTransformer<double>& model, const nn::TokenBatch& batch, bool backward) {
  nn::Tape<double> tape(backward);
  auto loss = nn::label_smoothed_nll(model.forward(tape, batch), batch.tgt_out, 0.1);
  const double value = loss.value()[0];
  if (backward) tape.backward(loss);
  return value;
}

// Central differences against the tape gradient, `per_param` coordinates
// drawn from every parameter tensor.
inline GradCheckResult transformer_grad_check(std::uint64_t seed, std::size_t per_param) {
  std::mt19937_64 rng(seed);
  nn::BasicTransformer<double> model(grad_check_config(), seed);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  for (auto& [id, p] : model.parameters()) {
    for (auto& v : p.value.values()) v += jitter(rng);
  }
  const std::vector<std::vector<int>> src{{3, 4, 5, 6}, {7, 8, 9}};
  const std::vector<std::vector<int>> tgt{{6, 5, 4, 3}, {9, 10}};
  const auto batch = nn::make_batch(src, tgt);

  tiny_loss(model, batch, true);
  GradCheckResult out;
  const double h = 1e-5;
  for (auto& [id, p] : model.parameters()) {
    std::uniform_int_distribution<std::size_t> pick(0, p.value.size() - 1);
    const auto analytic = p.grad;
    for (std::size_t k = 0; k < per_param; ++k) {
      const std::size_t i = pick(rng);
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = tiny_loss(model, batch, false);
      p.value[i] = saved - h;
      const double down = tiny_loss(model, batch, false);
      p.value[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = id + "[" + std::to_string(i) + "]";
      }
      ++out.coordinates;
    }
    ++out.parameters_touched;
  }
  return out;
}

}  // namespace autosize::testing
