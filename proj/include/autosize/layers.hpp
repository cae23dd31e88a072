// SPDX-License-Identifier: Apache-2.0
//
// Differentiable building blocks recorded on a Tape. Activations are stored as
// rank-2 (positions x features) tensors; a batch of B sequences of length L is
// B*L rows, sequence-major.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "autosize/autodiff.hpp"

namespace autosize::nn {

/// Which (query, key) pairs may attend, per batch element. Layout (B, Tq, Tk).
struct AttentionMask {
  std::size_t batch = 0;
  std::size_t q_len = 0;
  std::size_t k_len = 0;
  std::vector<std::uint8_t> allowed;

  /// Keys at positions >= key_lengths[b] are hidden; `causal` also hides keys after the query.
  static AttentionMask from_lengths(std::size_t batch, std::size_t q_len, std::size_t k_len,
                                    std::span<const std::size_t> key_lengths, bool causal);
  bool operator()(std::size_t b, std::size_t q, std::size_t k) const {
    return allowed[(b * q_len + q) * k_len + k] != 0;
  }
};

/// Rows of `table` selected by token ids.
template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

template <typename T>
Var<T> scale(Var<T> x, T factor);

/// x W^T + b for x (N, in), W (out, in), b (out). `bias` may be an invalid Var.
template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias);

/// Adds a bias row to every row of x.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias);

template <typename T>
Var<T> relu(Var<T> x);

/// Per-row normalisation followed by gamma * xhat + beta.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-5));

/// Inverted dropout; identity when p == 0 or rng is null.
template <typename T>
Var<T> dropout(Var<T> x, T p, std::mt19937_64* rng);

/// Scaled dot-product attention over already-projected q (B*Tq, d), k and v
/// (B*Tk, d), split into `heads` slices of the feature axis. Masked logits are
/// excluded from the softmax; a query with no visible key outputs zeros.
template <typename T>
Var<T> attention_core(Var<T> q, Var<T> k, Var<T> v, std::size_t heads, const AttentionMask& mask);

/// Mean over non-padding positions of the cross-entropy against
/// (1 - eps) * onehot(target) + eps * uniform. Targets equal to `pad_id` are skipped.
template <typename T>
Var<T> label_smoothed_nll(Var<T> logits, std::span<const int> targets, T epsilon, int pad_id = 0);

/// Sum of all entries.
template <typename T>
Var<T> sum(Var<T> x);

/// Per-token negative log-likelihood statistics, computed without a tape.
struct NllStats {
  double smoothed_sum = 0.0;
  double nll_sum = 0.0;
  std::size_t tokens = 0;
};

template <typename T>
NllStats nll_stats(const BasicTensor<T>& logits, std::span<const int> targets, double epsilon, int pad_id = 0);

/// Fixed sinusoidal encodings, rows 0..length-1.
template <typename T>
BasicTensor<T> sinusoidal_positions(std::size_t length, std::size_t d_model);

}  // namespace autosize::nn
