// SPDX-License-Identifier: Apache-2.0
//
// Post-norm Transformer encoder-decoder. Every attention and FFN sublayer is
// wrapped as LayerNorm(x + Sublayer(x)), so a sublayer whose parameters are all
// zero still passes its input through.
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "autosize/autodiff.hpp"
#include "autosize/layers.hpp"

namespace autosize::nn {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;

struct ModelConfig {
  std::size_t encoder_layers = 1;
  std::size_t decoder_layers = 1;
  std::size_t d_model = 32;
  std::size_t heads = 2;
  /// One entry per layer, encoder layers first. 0 means the FFN has no hidden units.
  std::vector<std::size_t> ffn_dims{64, 64};
  std::size_t vocab_size = 32;
  /// Longest source or decoder-input sequence (the decoder input includes BOS).
  std::size_t max_len = 16;
  double dropout = 0.0;
  /// Sublayers replaced by an identity pass-through, e.g. "enc.0.ffn", "dec.1.cross_attn".
  std::set<std::string> bypassed;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  std::size_t ffn_dim(bool decoder, std::size_t layer) const {
    return ffn_dims.at(decoder ? encoder_layers + layer : layer);
  }

  /// key=value lines sorted by key.
  std::string to_canonical_text() const;
  static ModelConfig from_canonical_text(const std::string& text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Name and shape of every parameter a config instantiates, plus its auto-sized flag.
struct ParameterSpec {
  Shape shape;
  bool auto_sized = false;
};
std::map<std::string, ParameterSpec> parameter_layout(const ModelConfig& config);

/// Padded sequence-to-sequence batch, row-major (batch, length).
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::vector<int> src;
  std::vector<std::size_t> src_lengths;
  /// BOS-prefixed decoder input.
  std::vector<int> tgt_in;
  /// Decoder targets, EOS-terminated; padding is kPad.
  std::vector<int> tgt_out;
  std::vector<std::size_t> tgt_lengths;
};

/// Builds a batch of one or more (source, target) pairs with BOS/EOS framing.
TokenBatch make_batch(std::span<const std::vector<int>> sources, std::span<const std::vector<int>> targets);

struct ForwardOptions {
  /// Enables dropout, drawing masks from rng.
  bool train = false;
  std::mt19937_64* rng = nullptr;
  /// Overrides the config's dropout when >= 0.
  double dropout = -1.0;
};

template <typename T>
class BasicTransformer {
 public:
  using Param = BasicParameter<T>;

  BasicTransformer() = default;
  /// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights; zero biases; unit layer-norm scales.
  BasicTransformer(ModelConfig config, std::uint64_t seed);
  /// Adopts existing parameter values; names and shapes must match the config layout.
  BasicTransformer(ModelConfig config, std::map<std::string, BasicTensor<T>> values);

  const ModelConfig& config() const { return config_; }
  std::map<std::string, Param>& parameters() { return params_; }
  const std::map<std::string, Param>& parameters() const { return params_; }
  Param& param(const std::string& id);
  const Param& param(const std::string& id) const;
  bool has_param(const std::string& id) const { return params_.count(id) != 0; }

  std::size_t parameter_count() const;
  void zero_grad();

  template <typename U>
  BasicTransformer<U> cast() const;

  /// Encoder memory (batch*src_len, d_model).
  Var<T> encode(Tape<T>& tape, const TokenBatch& batch, const ForwardOptions& options = {});
  /// Logits (batch*tgt_len, vocab) for the decoder inputs in `batch`.
  Var<T> decode(Tape<T>& tape, Var<T> memory, const TokenBatch& batch, const ForwardOptions& options = {});
  Var<T> forward(Tape<T>& tape, const TokenBatch& batch, const ForwardOptions& options = {});

 private:
  Var<T> p(Tape<T>& tape, const std::string& id) { return tape.param(param(id)); }
  T drop_rate(const ForwardOptions& options) const {
    if (!options.train) return T{0};
    return static_cast<T>(options.dropout >= 0.0 ? options.dropout : config_.dropout);
  }
  Var<T> sublayer_attention(Tape<T>& tape, const std::string& block, const std::string& norm, Var<T> x,
                            Var<T> memory, const AttentionMask& mask, const ForwardOptions& options);
  Var<T> sublayer_ffn(Tape<T>& tape, const std::string& block, const std::string& norm, Var<T> x,
                      const ForwardOptions& options);
  Var<T> embed(Tape<T>& tape, const std::string& table, std::span<const int> ids, std::size_t batch,
               std::size_t len);

  ModelConfig config_;
  std::map<std::string, Param> params_;
  BasicTensor<T> positions_;
};

using TransformerModel = BasicTransformer<float>;

/// FFN(x) = W2 max(0, W1 x + b1) + b2, position-wise.
template <typename T>
Var<T> ffn_forward(Var<T> x, Var<T> w1, Var<T> b1, Var<T> w2, Var<T> b2);

/// Projections of one attention block.
template <typename T>
struct AttentionParams {
  Var<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

/// Standard multi-head attention: project q/k/v, attend per head, project out.
template <typename T>
Var<T> multi_head_attention(Var<T> q, Var<T> k, Var<T> v, const AttentionMask& mask,
                            const AttentionParams<T>& params, std::size_t heads);

/// Logits (tgt_prefix length, vocab) for one sequence pair, dropout off.
Tensor model_forward(TransformerModel& model, std::span<const int> src, std::span<const int> tgt_prefix);

/// Appends argmax tokens after BOS until EOS or max_len tokens. The result
/// excludes BOS and EOS.
std::vector<int> greedy_decode(TransformerModel& model, std::span<const int> src, std::size_t max_len);
/// Batched form of greedy_decode.
std::vector<std::vector<int>> greedy_decode_batch(TransformerModel& model, std::span<const std::vector<int>> sources,
                                                  std::size_t max_len);

}  // namespace autosize::nn
