// SPDX-License-Identifier: Apache-2.0
#include "autosize/transformer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "autosize/errors.hpp"

namespace autosize::nn {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& text) {
  std::size_t value = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw FormatError("model config: bad integer for " + key + ": '" + text + "'");
  }
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  if (text.empty()) return parts;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  return parts;
}

bool is_bias_name(const std::string& id) {
  const auto leaf = id.substr(id.rfind('.') + 1);
  return leaf == "beta" || (!leaf.empty() && leaf[0] == 'b');
}

void add_attention(std::map<std::string, ParameterSpec>& out, const std::string& prefix, std::size_t d) {
  for (const char* name : {"q", "k", "v", "o"}) {
    out[prefix + ".W" + name] = {{d, d}, true};
    out[prefix + ".b" + name] = {{d}, false};
  }
}

void add_norm(std::map<std::string, ParameterSpec>& out, const std::string& prefix, std::size_t d) {
  out[prefix + ".gamma"] = {{d}, false};
  out[prefix + ".beta"] = {{d}, false};
}

void add_ffn(std::map<std::string, ParameterSpec>& out, const std::string& prefix, std::size_t d, std::size_t f,
             bool bypassed) {
  if (f > 0) {
    out[prefix + ".W1"] = {{f, d}, true};
    out[prefix + ".b1"] = {{f}, false};
    out[prefix + ".W2"] = {{d, f}, true};
  }
  if (!bypassed) out[prefix + ".b2"] = {{d}, false};
}

std::vector<std::string> sublayer_names(const ModelConfig& c) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < c.encoder_layers; ++i) {
    names.push_back("enc." + std::to_string(i) + ".self_attn");
    names.push_back("enc." + std::to_string(i) + ".ffn");
  }
  for (std::size_t i = 0; i < c.decoder_layers; ++i) {
    names.push_back("dec." + std::to_string(i) + ".self_attn");
    names.push_back("dec." + std::to_string(i) + ".cross_attn");
    names.push_back("dec." + std::to_string(i) + ".ffn");
  }
  return names;
}

}  // namespace

void ModelConfig::validate() const {
  if (encoder_layers == 0 || decoder_layers == 0) throw ConfigError("model: layer counts must be positive");
  if (d_model == 0 || d_model % 2 != 0) throw ConfigError("model: d_model must be positive and even");
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("model: heads (" + std::to_string(heads) + ") must divide d_model (" + std::to_string(d_model) + ")");
  }
  if (ffn_dims.size() != encoder_layers + decoder_layers) {
    throw ConfigError("model: ffn_dims needs one entry per layer (" + std::to_string(encoder_layers + decoder_layers) +
                      "), got " + std::to_string(ffn_dims.size()));
  }
  if (vocab_size <= static_cast<std::size_t>(kEos) + 1) throw ConfigError("model: vocab_size must exceed the reserved ids");
  if (max_len < 2) throw ConfigError("model: max_len must be at least 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
  const auto names = sublayer_names(*this);
  for (const auto& b : bypassed) {
    if (std::find(names.begin(), names.end(), b) == names.end()) {
      throw ConfigError("model: unknown bypassed sublayer '" + b + "'");
    }
  }
  for (std::size_t i = 0; i < ffn_dims.size(); ++i) {
    const bool dec = i >= encoder_layers;
    const std::string name = (dec ? "dec." : "enc.") + std::to_string(dec ? i - encoder_layers : i) + ".ffn";
    if (bypassed.count(name) && ffn_dims[i] != 0) throw ConfigError("model: bypassed FFN " + name + " must have ffn dim 0");
  }
}

std::string ModelConfig::to_canonical_text() const {
  std::map<std::string, std::string> kv;
  std::string by;
  for (const auto& b : bypassed) by += (by.empty() ? "" : ",") + b;
  kv["bypassed"] = by;
  kv["d_model"] = std::to_string(d_model);
  kv["decoder_layers"] = std::to_string(decoder_layers);
  kv["dropout"] = format_double(dropout);
  kv["encoder_layers"] = std::to_string(encoder_layers);
  kv["ffn_dims"] = join_sizes(ffn_dims);
  kv["heads"] = std::to_string(heads);
  kv["max_len"] = std::to_string(max_len);
  kv["vocab_size"] = std::to_string(vocab_size);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

ModelConfig ModelConfig::from_canonical_text(const std::string& text) {
  ModelConfig c;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("model config: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    seen.insert(key);
    if (key == "bypassed") {
      c.bypassed.clear();
      for (auto& s : split(value, ',')) c.bypassed.insert(s);
    } else if (key == "d_model") {
      c.d_model = parse_size(key, value);
    } else if (key == "decoder_layers") {
      c.decoder_layers = parse_size(key, value);
    } else if (key == "dropout") {
      double d = 0.0;
      auto res = std::from_chars(value.data(), value.data() + value.size(), d);
      if (res.ec != std::errc{}) throw FormatError("model config: bad dropout '" + value + "'");
      c.dropout = d;
    } else if (key == "encoder_layers") {
      c.encoder_layers = parse_size(key, value);
    } else if (key == "ffn_dims") {
      c.ffn_dims.clear();
      for (auto& s : split(value, ',')) c.ffn_dims.push_back(parse_size(key, s));
    } else if (key == "heads") {
      c.heads = parse_size(key, value);
    } else if (key == "max_len") {
      c.max_len = parse_size(key, value);
    } else if (key == "vocab_size") {
      c.vocab_size = parse_size(key, value);
    } else {
      throw FormatError("model config: unknown key '" + key + "'");
    }
  }
  for (const char* k : {"d_model", "decoder_layers", "encoder_layers", "ffn_dims", "heads", "max_len", "vocab_size"}) {
    if (!seen.count(k)) throw FormatError(std::string("model config: missing key ") + k);
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  return c;
}

std::map<std::string, ParameterSpec> parameter_layout(const ModelConfig& c) {
  c.validate();
  std::map<std::string, ParameterSpec> out;
  const std::size_t d = c.d_model;
  out["src_embed"] = {{c.vocab_size, d}, false};
  out["tgt_embed"] = {{c.vocab_size, d}, false};
  out["out.W"] = {{c.vocab_size, d}, false};
  out["out.b"] = {{c.vocab_size}, false};
  for (std::size_t i = 0; i < c.encoder_layers; ++i) {
    const std::string pre = "enc." + std::to_string(i);
    if (!c.bypassed.count(pre + ".self_attn")) add_attention(out, pre + ".self_attn", d);
    add_norm(out, pre + ".ln1", d);
    add_ffn(out, pre + ".ffn", d, c.ffn_dim(false, i), c.bypassed.count(pre + ".ffn") != 0);
    add_norm(out, pre + ".ln2", d);
  }
  for (std::size_t i = 0; i < c.decoder_layers; ++i) {
    const std::string pre = "dec." + std::to_string(i);
    if (!c.bypassed.count(pre + ".self_attn")) add_attention(out, pre + ".self_attn", d);
    add_norm(out, pre + ".ln1", d);
    if (!c.bypassed.count(pre + ".cross_attn")) add_attention(out, pre + ".cross_attn", d);
    add_norm(out, pre + ".ln2", d);
    add_ffn(out, pre + ".ffn", d, c.ffn_dim(true, i), c.bypassed.count(pre + ".ffn") != 0);
    add_norm(out, pre + ".ln3", d);
  }
  return out;
}

TokenBatch make_batch(std::span<const std::vector<int>> sources, std::span<const std::vector<int>> targets) {
  if (sources.size() != targets.size() || sources.empty()) {
    throw InvalidInput("make_batch: need equally many (non-zero) sources and targets");
  }
  TokenBatch b;
  b.batch = sources.size();
  for (std::size_t i = 0; i < b.batch; ++i) {
    if (sources[i].empty()) throw InvalidInput("make_batch: empty source sequence");
    b.src_len = std::max(b.src_len, sources[i].size());
    b.tgt_len = std::max(b.tgt_len, targets[i].size() + 1);
  }
  b.src.assign(b.batch * b.src_len, kPad);
  b.tgt_in.assign(b.batch * b.tgt_len, kPad);
  b.tgt_out.assign(b.batch * b.tgt_len, kPad);
  for (std::size_t i = 0; i < b.batch; ++i) {
    std::copy(sources[i].begin(), sources[i].end(), b.src.begin() + i * b.src_len);
    b.src_lengths.push_back(sources[i].size());
    b.tgt_in[i * b.tgt_len] = kBos;
    std::copy(targets[i].begin(), targets[i].end(), b.tgt_in.begin() + i * b.tgt_len + 1);
    std::copy(targets[i].begin(), targets[i].end(), b.tgt_out.begin() + i * b.tgt_len);
    b.tgt_out[i * b.tgt_len + targets[i].size()] = kEos;
    b.tgt_lengths.push_back(targets[i].size() + 1);
  }
  return b;
}

template <typename T>
Var<T> ffn_forward(Var<T> x, Var<T> w1, Var<T> b1, Var<T> w2, Var<T> b2) {
  const auto& w1v = w1.value();
  const auto& w2v = w2.value();
  if (w1v.rank() != 2 || w2v.rank() != 2 || w2v.cols() != w1v.rows() || w2v.rows() != w1v.cols()) {
    throw ShapeError("ffn: W1 " + shape_str(w1v.shape()) + " and W2 " + shape_str(w2v.shape()) + " do not conform");
  }
  return linear(relu(linear(x, w1, b1)), w2, b2);
}

template <typename T>
Var<T> multi_head_attention(Var<T> q, Var<T> k, Var<T> v, const AttentionMask& mask,
                            const AttentionParams<T>& ps, std::size_t heads) {
  const auto qp = linear(q, ps.wq, ps.bq);
  const auto kp = linear(k, ps.wk, ps.bk);
  const auto vp = linear(v, ps.wv, ps.bv);
  return linear(attention_core(qp, kp, vp, heads, mask), ps.wo, ps.bo);
}

template <typename T>
BasicTransformer<T>::BasicTransformer(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  const auto layout = parameter_layout(config_);
  std::mt19937_64 rng(seed);
  for (const auto& [id, spec] : layout) {
    BasicTensor<T> value(spec.shape);
    if (id.size() > 6 && id.compare(id.size() - 6, 6, ".gamma") == 0) {
      value.fill(T{1});
    } else if (!is_bias_name(id)) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.shape[1]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& e : value.values()) e = static_cast<T>(dist(rng));
    }
    params_.emplace(id, Param(id, std::move(value), spec.auto_sized));
  }
  positions_ = sinusoidal_positions<T>(config_.max_len, config_.d_model);
}

template <typename T>
BasicTransformer<T>::BasicTransformer(ModelConfig config, std::map<std::string, BasicTensor<T>> values)
    : config_(std::move(config)) {
  const auto layout = parameter_layout(config_);
  if (values.size() != layout.size()) {
    throw FormatError("model: expected " + std::to_string(layout.size()) + " parameters, got " +
                      std::to_string(values.size()));
  }
  for (auto& [id, spec] : layout) {
    auto it = values.find(id);
    if (it == values.end()) throw FormatError("model: missing parameter " + id);
    if (it->second.shape() != spec.shape) {
      throw FormatError("model: parameter " + id + " has shape " + shape_str(it->second.shape()) + ", expected " +
                        shape_str(spec.shape));
    }
    params_.emplace(id, Param(id, std::move(it->second), spec.auto_sized));
  }
  positions_ = sinusoidal_positions<T>(config_.max_len, config_.d_model);
}

template <typename T>
typename BasicTransformer<T>::Param& BasicTransformer<T>::param(const std::string& id) {
  auto it = params_.find(id);
  if (it == params_.end()) throw InvalidInput("model: no parameter named " + id);
  return it->second;
}

template <typename T>
const typename BasicTransformer<T>::Param& BasicTransformer<T>::param(const std::string& id) const {
  auto it = params_.find(id);
  if (it == params_.end()) throw InvalidInput("model: no parameter named " + id);
  return it->second;
}

template <typename T>
std::size_t BasicTransformer<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [id, p] : params_) n += p.value.size();
  return n;
}

template <typename T>
void BasicTransformer<T>::zero_grad() {
  for (auto& [id, p] : params_) p.zero_grad();
}

template <typename T>
template <typename U>
BasicTransformer<U> BasicTransformer<T>::cast() const {
  std::map<std::string, BasicTensor<U>> values;
  for (const auto& [id, p] : params_) values.emplace(id, p.value.template cast<U>());
  return BasicTransformer<U>(config_, std::move(values));
}

template <typename T>
Var<T> BasicTransformer<T>::embed(Tape<T>& tape, const std::string& table, std::span<const int> ids,
                                  std::size_t batch, std::size_t len) {
  if (len > config_.max_len) {
    throw InvalidInput("model: sequence length " + std::to_string(len) + " exceeds max_len " +
                       std::to_string(config_.max_len));
  }
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw InvalidInput("model: token id " + std::to_string(id) + " outside vocabulary of " +
                         std::to_string(config_.vocab_size));
    }
  }
  const std::size_t d = config_.d_model;
  BasicTensor<T> pe({batch * len, d});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(positions_.data(), len * d, pe.data() + b * len * d);
  }
  const auto emb = scale(embedding(p(tape, table), ids), static_cast<T>(std::sqrt(static_cast<double>(d))));
  return add(emb, tape.constant(std::move(pe)));
}

template <typename T>
Var<T> BasicTransformer<T>::sublayer_attention(Tape<T>& tape, const std::string& block, const std::string& norm,
                                               Var<T> x, Var<T> memory, const AttentionMask& mask,
                                               const ForwardOptions& options) {
  const auto gamma = p(tape, norm + ".gamma");
  const auto beta = p(tape, norm + ".beta");
  if (config_.bypassed.count(block)) return layer_norm(x, gamma, beta);
  AttentionParams<T> ps{p(tape, block + ".Wq"), p(tape, block + ".bq"), p(tape, block + ".Wk"),
                        p(tape, block + ".bk"), p(tape, block + ".Wv"), p(tape, block + ".bv"),
                        p(tape, block + ".Wo"), p(tape, block + ".bo")};
  const Var<T> kv = memory.valid() ? memory : x;
  auto y = multi_head_attention(x, kv, kv, mask, ps, config_.heads);
  y = dropout(y, drop_rate(options), options.rng);
  return layer_norm(add(x, y), gamma, beta);
}

template <typename T>
Var<T> BasicTransformer<T>::sublayer_ffn(Tape<T>& tape, const std::string& block, const std::string& norm, Var<T> x,
                                         const ForwardOptions& options) {
  const auto gamma = p(tape, norm + ".gamma");
  const auto beta = p(tape, norm + ".beta");
  if (config_.bypassed.count(block)) return layer_norm(x, gamma, beta);
  Var<T> y;
  if (has_param(block + ".W1")) {
    y = ffn_forward(x, p(tape, block + ".W1"), p(tape, block + ".b1"), p(tape, block + ".W2"), p(tape, block + ".b2"));
  } else {
    y = add_bias(tape.constant(BasicTensor<T>(x.shape())), p(tape, block + ".b2"));
  }
  y = dropout(y, drop_rate(options), options.rng);
  return layer_norm(add(x, y), gamma, beta);
}

template <typename T>
Var<T> BasicTransformer<T>::encode(Tape<T>& tape, const TokenBatch& batch, const ForwardOptions& options) {
  auto x = embed(tape, "src_embed", batch.src, batch.batch, batch.src_len);
  x = dropout(x, drop_rate(options), options.rng);
  const auto mask = AttentionMask::from_lengths(batch.batch, batch.src_len, batch.src_len, batch.src_lengths, false);
  for (std::size_t i = 0; i < config_.encoder_layers; ++i) {
    const std::string pre = "enc." + std::to_string(i);
    x = sublayer_attention(tape, pre + ".self_attn", pre + ".ln1", x, Var<T>{}, mask, options);
    x = sublayer_ffn(tape, pre + ".ffn", pre + ".ln2", x, options);
  }
  return x;
}

template <typename T>
Var<T> BasicTransformer<T>::decode(Tape<T>& tape, Var<T> memory, const TokenBatch& batch,
                                   const ForwardOptions& options) {
  auto x = embed(tape, "tgt_embed", batch.tgt_in, batch.batch, batch.tgt_len);
  x = dropout(x, drop_rate(options), options.rng);
  const auto self_mask =
      AttentionMask::from_lengths(batch.batch, batch.tgt_len, batch.tgt_len, batch.tgt_lengths, true);
  const auto cross_mask =
      AttentionMask::from_lengths(batch.batch, batch.tgt_len, batch.src_len, batch.src_lengths, false);
  for (std::size_t i = 0; i < config_.decoder_layers; ++i) {
    const std::string pre = "dec." + std::to_string(i);
    x = sublayer_attention(tape, pre + ".self_attn", pre + ".ln1", x, Var<T>{}, self_mask, options);
    x = sublayer_attention(tape, pre + ".cross_attn", pre + ".ln2", x, memory, cross_mask, options);
    x = sublayer_ffn(tape, pre + ".ffn", pre + ".ln3", x, options);
  }
  return linear(x, p(tape, "out.W"), p(tape, "out.b"));
}

template <typename T>
Var<T> BasicTransformer<T>::forward(Tape<T>& tape, const TokenBatch& batch, const ForwardOptions& options) {
  const auto memory = encode(tape, batch, options);
  return decode(tape, memory, batch, options);
}

Tensor model_forward(TransformerModel& model, std::span<const int> src, std::span<const int> tgt_prefix) {
  if (src.empty() || tgt_prefix.empty()) throw InvalidInput("model_forward: empty sequence");
  TokenBatch b;
  b.batch = 1;
  b.src_len = src.size();
  b.tgt_len = tgt_prefix.size();
  b.src.assign(src.begin(), src.end());
  b.src_lengths = {src.size()};
  b.tgt_in.assign(tgt_prefix.begin(), tgt_prefix.end());
  b.tgt_out.assign(tgt_prefix.size(), kPad);
  b.tgt_lengths = {tgt_prefix.size()};
  Tape<float> tape(false);
  return model.forward(tape, b).value();
}

std::vector<std::vector<int>> greedy_decode_batch(TransformerModel& model, std::span<const std::vector<int>> sources,
                                                  std::size_t max_len) {
  std::vector<std::vector<int>> out(sources.size());
  if (sources.empty()) return out;
  const std::size_t steps = std::min(max_len, model.config().max_len - 1);
  std::vector<std::vector<int>> dummy_targets(sources.size());
  TokenBatch batch = make_batch(sources, dummy_targets);
  Tape<float> tape(false);
  const auto memory = model.encode(tape, batch);
  const std::size_t V = model.config().vocab_size;
  std::vector<bool> done(sources.size(), false);
  for (std::size_t t = 1; t <= steps; ++t) {
    batch.tgt_len = t;
    batch.tgt_in.assign(batch.batch * t, kPad);
    for (std::size_t b = 0; b < batch.batch; ++b) {
      batch.tgt_in[b * t] = kBos;
      for (std::size_t j = 0; j < out[b].size() && j + 1 < t; ++j) batch.tgt_in[b * t + j + 1] = out[b][j];
    }
    batch.tgt_out.assign(batch.batch * t, kPad);
    batch.tgt_lengths.assign(batch.batch, t);
    const auto& logits = model.decode(tape, memory, batch).value();
    bool all_done = true;
    for (std::size_t b = 0; b < batch.batch; ++b) {
      if (done[b]) continue;
      const float* row = logits.data() + (b * t + t - 1) * V;
      const int next = static_cast<int>(std::max_element(row, row + V) - row);
      if (next == kEos) {
        done[b] = true;
      } else {
        out[b].push_back(next);
        all_done = false;
      }
    }
    if (all_done) break;
  }
  return out;
}

std::vector<int> greedy_decode(TransformerModel& model, std::span<const int> src, std::size_t max_len) {
  const std::vector<std::vector<int>> sources{std::vector<int>(src.begin(), src.end())};
  return greedy_decode_batch(model, sources, max_len).front();
}

template class BasicTransformer<float>;
template class BasicTransformer<double>;
template BasicTransformer<double> BasicTransformer<float>::cast<double>() const;
template BasicTransformer<float> BasicTransformer<double>::cast<float>() const;
template BasicTransformer<float> BasicTransformer<float>::cast<float>() const;
template Var<float> ffn_forward<float>(Var<float>, Var<float>, Var<float>, Var<float>, Var<float>);
template Var<double> ffn_forward<double>(Var<double>, Var<double>, Var<double>, Var<double>, Var<double>);
template Var<float> multi_head_attention<float>(Var<float>, Var<float>, Var<float>, const AttentionMask&,
                                                const AttentionParams<float>&, std::size_t);
template Var<double> multi_head_attention<double>(Var<double>, Var<double>, Var<double>, const AttentionMask&,
                                                  const AttentionParams<double>&, std::size_t);

}  // namespace autosize::nn
