// SPDX-License-Identifier: Apache-2.0
#include "autosize/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace autosize::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using RowVecMap = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;
template <typename T>
using ConstRowVecMap = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;
// Head slices of a (rows, d) buffer: rows with a stride of d.
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
ConstMatMap<T> as_matrix(const BasicTensor<T>& t) {
  return ConstMatMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
template <typename T>
MatMap<T> as_matrix(BasicTensor<T>& t) {
  return MatMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
void require_matrix(const BasicTensor<T>& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2 input, got " + shape_str(t.shape()));
}

template <typename T>
Var<T> out_var(Tape<T>& tape, std::size_t id) {
  return {&tape, id};
}

}  // namespace

AttentionMask AttentionMask::from_lengths(std::size_t batch, std::size_t q_len, std::size_t k_len,
                                          std::span<const std::size_t> key_lengths, bool causal) {
  if (key_lengths.size() != batch) throw ShapeError("attention mask: one key length per batch element required");
  AttentionMask m{batch, q_len, k_len, std::vector<std::uint8_t>(batch * q_len * k_len, 0)};
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t q = 0; q < q_len; ++q) {
      for (std::size_t k = 0; k < k_len; ++k) {
        const bool ok = k < key_lengths[b] && (!causal || k <= q);
        m.allowed[(b * q_len + q) * k_len + k] = ok ? 1 : 0;
      }
    }
  }
  return m;
}

template <typename T>
Var<T> embedding(Var<T> table, std::span<const int> ids) {
  Tape<T>& tape = *table.tape;
  const auto& tv = table.value();
  require_matrix(tv, "embedding");
  const std::size_t d = tv.cols();
  BasicTensor<T> out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.rows()) {
      throw InvalidInput("embedding: token id " + std::to_string(ids[i]) + " out of range");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  const std::size_t self = tape.size();
  std::vector<int> saved(ids.begin(), ids.end());
  return tape.record(std::move(out), tape.needs_grad(table), [table, self, saved = std::move(saved), d](Tape<T>& t) {
    const auto& g = t.grad(out_var(t, self));
    auto& gt = t.grad_buffer(table);
    for (std::size_t i = 0; i < saved.size(); ++i) {
      T* dst = gt.data() + static_cast<std::size_t>(saved[i]) * d;
      const T* src = g.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tape = *a.tape;
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) {
    throw ShapeError("add: shape mismatch " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  }
  BasicTensor<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t self = tape.size();
  return tape.record(std::move(out), tape.needs_grad(a) || tape.needs_grad(b), [a, b, self](Tape<T>& t) {
    const auto& g = t.grad(out_var(t, self));
    for (Var<T> in : {a, b}) {
      if (!t.needs_grad(in)) continue;
      auto& gi = t.grad_buffer(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
  Tape<T>& tape = *x.tape;
  BasicTensor<T> out = x.value();
  for (auto& e : out.values()) e *= factor;
  const std::size_t self = tape.size();
  return tape.record(std::move(out), tape.needs_grad(x), [x, self, factor](Tape<T>& t) {
    const auto& g = t.grad(out_var(t, self));
    auto& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
  });
}

template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.value();
  const auto& wv = weight.value();
  require_matrix(xv, "linear");
  require_matrix(wv, "linear");
  if (xv.cols() != wv.cols()) {
    throw ShapeError("linear: input " + shape_str(xv.shape()) + " does not match weight " + shape_str(wv.shape()));
  }
  const bool has_bias = bias.valid();
  if (has_bias && bias.value().size() != wv.rows()) {
    throw ShapeError("linear: bias " + shape_str(bias.value().shape()) + " does not match weight " +
                     shape_str(wv.shape()));
  }
  BasicTensor<T> out({xv.rows(), wv.rows()});
  auto y = as_matrix(out);
  y.noalias() = as_matrix(xv) * as_matrix(wv).transpose();
  if (has_bias) {
    y.rowwise() += ConstRowVecMap<T>(bias.value().data(), static_cast<Eigen::Index>(wv.rows()));
  }
  const bool needs = tape.needs_grad(x) || tape.needs_grad(weight) || (has_bias && tape.needs_grad(bias));
  const std::size_t self = tape.size();
  return tape.record(std::move(out), needs, [x, weight, bias, has_bias, self](Tape<T>& t) {
    const auto& g = t.grad(out_var(t, self));
    const auto gy = as_matrix(g);
    if (t.needs_grad(x)) as_matrix(t.grad_buffer(x)).noalias() += gy * as_matrix(t.value(weight));
    if (t.needs_grad(weight)) as_matrix(t.grad_buffer(weight)).noalias() += gy.transpose() * as_matrix(t.value(x));
    if (has_bias && t.needs_grad(bias)) {
      auto& gb = t.grad_buffer(bias);
      RowVecMap<T>(gb.data(), static_cast<Eigen::Index>(gb.size())) += gy.colwise().sum();
    }
  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.value();
  require_matrix(xv, "add_bias");
  if (bias.value().size() != xv.cols()) throw ShapeError("add_bias: bias length does not match features");
  BasicTensor<T> out = xv;
  as_matrix(out).rowwise() += ConstRowVecMap<T>(bias.value().data(), static_cast<Eigen::Index>(xv.cols()));
  const std::size_t self = tape.size();
  return tape.record(std::move(out), tape.needs_grad(x) || tape.needs_grad(bias), [x, bias, self](Tape<T>& t) {
    const auto& g = t.grad(out_var(t, self));
    if (t.needs_grad(x)) {
      auto& gx = t.grad_buffer(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.needs_grad(bias)) {
      auto& gb = t.grad_buffer(bias);
      RowVecMap<T>(gb.data(), static_cast<Eigen::Index>(gb.size())) += as_matrix(g).colwise().sum();
    }
  });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Tape<T>& tape = *x.tape;
  BasicTensor<T> out = x.value();
  for (auto& e : out.values()) e = e > T{0} ? e : T{0};
  const std::size_t self = tape.size();
  return tape.record(std::move(out), tape.needs_grad(x), [x, self](Tape<T>& t) {
    const auto& g = t.grad(out_var(t, self));
    const auto& y = t.value(out_var(t, self));
    auto& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (y[i] > T{0}) gx[i] += g[i];
    }
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.value();
  require_matrix(xv, "layer_norm");
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols();
  if (gamma.value().size() != d || beta.value().size() != d) throw ShapeError("layer_norm: scale/shift length mismatch");
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  BasicTensor<T> out({n, d});
  auto rstd = std::make_shared<std::vector<T>>(n);
  auto xhat = std::make_shared<std::vector<T>>(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = xv.data() + r * d;
    T mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<T>(d);
    const T inv = T{1} / std::sqrt(var + eps);
    (*rstd)[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mean) * inv;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = gv[j] * h + bv[j];
    }
  }
  const bool needs = tape.needs_grad(x) || tape.needs_grad(gamma) || tape.needs_grad(beta);
  const std::size_t self = tape.size();
  return tape.record(std::move(out), needs, [x, gamma, beta, self, rstd, xhat, n, d](Tape<T>& t) {
    const auto& g = t.grad(out_var(t, self));
    const auto& gv = t.value(gamma);
    if (t.needs_grad(gamma) || t.needs_grad(beta)) {
      auto& gg = t.grad_buffer(gamma);
      auto& gb = t.grad_buffer(beta);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
          gg[j] += g[r * d + j] * (*xhat)[r * d + j];
          gb[j] += g[r * d + j];
        }
      }
    }
    if (t.needs_grad(x)) {
      auto& gx = t.grad_buffer(x);
      for (std::size_t r = 0; r < n; ++r) {
        T mean_dh = 0;
        T mean_dh_h = 0;
        for (std::size_t j = 0; j < d; ++j) {
          const T dh = g[r * d + j] * gv[j];
          mean_dh += dh;
          mean_dh_h += dh * (*xhat)[r * d + j];
        }
        mean_dh /= static_cast<T>(d);
        mean_dh_h /= static_cast<T>(d);
        for (std::size_t j = 0; j < d; ++j) {
          const T dh = g[r * d + j] * gv[j];
          gx[r * d + j] += (*rstd)[r] * (dh - mean_dh - (*xhat)[r * d + j] * mean_dh_h);
        }
      }
    }
  });
}

template <typename T>
Var<T> dropout(Var<T> x, T p, std::mt19937_64* rng) {
  if (p <= T{0} || rng == nullptr) return x;
  if (p >= T{1}) throw InvalidInput("dropout: probability must be < 1");
  Tape<T>& tape = *x.tape;
  BasicTensor<T> out = x.value();
  auto mask = std::make_shared<std::vector<T>>(out.size());
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const T scale_kept = T{1} / (T{1} - p);
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = keep(*rng) ? scale_kept : T{0};
    out[i] *= (*mask)[i];
  }
  const std::size_t self = tape.size();
  return tape.record(std::move(out), tape.needs_grad(x), [x, self, mask](Tape<T>& t) {
    const auto& g = t.grad(out_var(t, self));
    auto& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
  });
}

template <typename T>
Var<T> attention_core(Var<T> q, Var<T> k, Var<T> v, std::size_t heads, const AttentionMask& mask) {
  Tape<T>& tape = *q.tape;
  const auto& qv = q.value();
  const auto& kv = k.value();
  const auto& vv = v.value();
  require_matrix(qv, "attention");
  require_matrix(kv, "attention");
  require_matrix(vv, "attention");
  const std::size_t d = qv.cols();
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("attention: " + std::to_string(heads) + " heads do not divide feature size " + std::to_string(d));
  }
  if (kv.cols() != d || vv.cols() != d || kv.rows() != vv.rows()) throw ShapeError("attention: q/k/v feature mismatch");
  const std::size_t B = mask.batch;
  const std::size_t Tq = mask.q_len;
  const std::size_t Tk = mask.k_len;
  if (qv.rows() != B * Tq || kv.rows() != B * Tk || mask.allowed.size() != B * Tq * Tk) {
    throw ShapeError("attention: mask shape does not match the attention logits");
  }
  const std::size_t dk = d / heads;
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dk));
  const auto D = static_cast<Eigen::Index>(d);
  const auto eTq = static_cast<Eigen::Index>(Tq);
  const auto eTk = static_cast<Eigen::Index>(Tk);
  const auto eDk = static_cast<Eigen::Index>(dk);

  auto probs = std::make_shared<std::vector<T>>(B * heads * Tq * Tk, T{0});
  BasicTensor<T> out({B * Tq, d});
  RowMat<T> scores(eTq, eTk);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      ConstStridedMap<T> qh(qv.data() + b * Tq * d + h * dk, eTq, eDk, Eigen::OuterStride<>(D));
      ConstStridedMap<T> kh(kv.data() + b * Tk * d + h * dk, eTk, eDk, Eigen::OuterStride<>(D));
      ConstStridedMap<T> vh(vv.data() + b * Tk * d + h * dk, eTk, eDk, Eigen::OuterStride<>(D));
      scores.noalias() = (qh * kh.transpose()) * inv_sqrt;
      MatMap<T> p(probs->data() + ((b * heads + h) * Tq) * Tk, eTq, eTk);
      for (std::size_t i = 0; i < Tq; ++i) {
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < Tk; ++j) {
          if (mask(b, i, j)) mx = std::max(mx, scores(i, j));
        }
        if (mx == -std::numeric_limits<T>::infinity()) continue;  // no visible key: zeros
        T total = 0;
        for (std::size_t j = 0; j < Tk; ++j) {
          const T e = mask(b, i, j) ? std::exp(scores(i, j) - mx) : T{0};
          p(i, j) = e;
          total += e;
        }
        p.row(static_cast<Eigen::Index>(i)) /= total;
      }
      StridedMap<T> oh(out.data() + b * Tq * d + h * dk, eTq, eDk, Eigen::OuterStride<>(D));
      oh.noalias() = p * vh;
    }
  }

  const bool needs = tape.needs_grad(q) || tape.needs_grad(k) || tape.needs_grad(v);
  const std::size_t self = tape.size();
  return tape.record(std::move(out), needs, [=](Tape<T>& t) {
    const auto& g = t.grad(out_var(t, self));
    const auto& qv2 = t.value(q);
    const auto& kv2 = t.value(k);
    const auto& vv2 = t.value(v);
    T* gq = t.needs_grad(q) ? t.grad_buffer(q).data() : nullptr;
    T* gk = t.needs_grad(k) ? t.grad_buffer(k).data() : nullptr;
    T* gv = t.needs_grad(v) ? t.grad_buffer(v).data() : nullptr;
    RowMat<T> dp(eTq, eTk);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < heads; ++h) {
        const auto qoff = b * Tq * d + h * dk;
        const auto koff = b * Tk * d + h * dk;
        ConstStridedMap<T> qh(qv2.data() + qoff, eTq, eDk, Eigen::OuterStride<>(D));
        ConstStridedMap<T> kh(kv2.data() + koff, eTk, eDk, Eigen::OuterStride<>(D));
        ConstStridedMap<T> vh(vv2.data() + koff, eTk, eDk, Eigen::OuterStride<>(D));
        ConstStridedMap<T> goh(g.data() + qoff, eTq, eDk, Eigen::OuterStride<>(D));
        ConstMatMap<T> p(probs->data() + ((b * heads + h) * Tq) * Tk, eTq, eTk);
        if (gv) StridedMap<T>(gv + koff, eTk, eDk, Eigen::OuterStride<>(D)).noalias() += p.transpose() * goh;
        if (!gq && !gk) continue;
        dp.noalias() = goh * vh.transpose();
        // softmax backward: ds = p * (dp - rowsum(dp * p))
        for (Eigen::Index i = 0; i < eTq; ++i) {
          const T dot = (dp.row(i).array() * p.row(i).array()).sum();
          dp.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
        }
        dp *= inv_sqrt;
        if (gq) StridedMap<T>(gq + qoff, eTq, eDk, Eigen::OuterStride<>(D)).noalias() += dp * kh;
        if (gk) StridedMap<T>(gk + koff, eTk, eDk, Eigen::OuterStride<>(D)).noalias() += dp.transpose() * qh;
      }
    }
  });
}

template <typename T>
Var<T> label_smoothed_nll(Var<T> logits, std::span<const int> targets, T epsilon, int pad_id) {
  if (!(epsilon >= T{0} && epsilon < T{1})) throw InvalidInput("label smoothing epsilon must lie in [0, 1)");
  Tape<T>& tape = *logits.tape;
  const auto& lv = logits.value();
  require_matrix(lv, "label_smoothed_nll");
  if (targets.size() != lv.rows()) throw ShapeError("label_smoothed_nll: one target per logit row required");
  const std::size_t V = lv.cols();
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    if (targets[r] == pad_id) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= V) throw InvalidInput("label_smoothed_nll: target out of range");
    const T* z = lv.data() + r * V;
    const T mx = *std::max_element(z, z + V);
    double se = 0.0;
    double mean_z = 0.0;
    for (std::size_t j = 0; j < V; ++j) {
      se += std::exp(static_cast<double>(z[j] - mx));
      mean_z += static_cast<double>(z[j]);
    }
    mean_z /= static_cast<double>(V);
    const double lse = static_cast<double>(mx) + std::log(se);
    const double nll = lse - static_cast<double>(z[targets[r]]);
    const double uniform = lse - mean_z;
    total += (1.0 - static_cast<double>(epsilon)) * nll + static_cast<double>(epsilon) * uniform;
    ++count;
  }
  if (count == 0) throw InvalidInput("label_smoothed_nll: every target is padding");
  BasicTensor<T> out({1}, static_cast<T>(total / static_cast<double>(count)));
  std::vector<int> saved(targets.begin(), targets.end());
  const std::size_t self = tape.size();
  return tape.record(std::move(out), tape.needs_grad(logits),
                     [logits, self, saved = std::move(saved), epsilon, pad_id, count, V](Tape<T>& t) {
                       const T upstream = t.grad(out_var(t, self))[0] / static_cast<T>(count);
                       const auto& lv2 = t.value(logits);
                       auto& gl = t.grad_buffer(logits);
                       const T off = epsilon / static_cast<T>(V);
                       for (std::size_t r = 0; r < saved.size(); ++r) {
                         if (saved[r] == pad_id) continue;
                         const T* z = lv2.data() + r * V;
                         T* gz = gl.data() + r * V;
                         const T mx = *std::max_element(z, z + V);
                         T se = 0;
                         for (std::size_t j = 0; j < V; ++j) se += std::exp(z[j] - mx);
                         for (std::size_t j = 0; j < V; ++j) {
                           const T target = off + (static_cast<int>(j) == saved[r] ? T{1} - epsilon : T{0});
                           gz[j] += upstream * (std::exp(z[j] - mx) / se - target);
                         }
                       }
                     });
}

template <typename T>
Var<T> sum(Var<T> x) {
  Tape<T>& tape = *x.tape;
  T total = 0;
  for (T e : x.value().values()) total += e;
  const std::size_t self = tape.size();
  return tape.record(BasicTensor<T>({1}, total), tape.needs_grad(x), [x, self](Tape<T>& t) {
    const T g = t.grad(out_var(t, self))[0];
    for (auto& e : t.grad_buffer(x).values()) e += g;
  });
}

template <typename T>
NllStats nll_stats(const BasicTensor<T>& logits, std::span<const int> targets, double epsilon, int pad_id) {
  NllStats stats;
  const std::size_t V = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (targets[r] == pad_id) continue;
    const T* z = logits.data() + r * V;
    const double mx = static_cast<double>(*std::max_element(z, z + V));
    double se = 0.0;
    double mean_z = 0.0;
    for (std::size_t j = 0; j < V; ++j) {
      se += std::exp(static_cast<double>(z[j]) - mx);
      mean_z += static_cast<double>(z[j]);
    }
    mean_z /= static_cast<double>(V);
    const double lse = mx + std::log(se);
    const double nll = lse - static_cast<double>(z[targets[r]]);
    stats.nll_sum += nll;
    stats.smoothed_sum += (1.0 - epsilon) * nll + epsilon * (lse - mean_z);
    ++stats.tokens;
  }
  return stats;
}

template <typename T>
BasicTensor<T> sinusoidal_positions(std::size_t length, std::size_t d_model) {
  BasicTensor<T> pe({length, d_model});
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < d_model; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d_model));
      pe.at(pos, i) = static_cast<T>(std::sin(static_cast<double>(pos) * freq));
      if (i + 1 < d_model) pe.at(pos, i + 1) = static_cast<T>(std::cos(static_cast<double>(pos) * freq));
    }
  }
  return pe;
}

#define AUTOSIZE_INSTANTIATE_LAYERS(T)                                                                 \
  template Var<T> embedding<T>(Var<T>, std::span<const int>);                                          \
  template Var<T> add<T>(Var<T>, Var<T>);                                                              \
  template Var<T> scale<T>(Var<T>, T);                                                                 \
  template Var<T> linear<T>(Var<T>, Var<T>, Var<T>);                                                   \
  template Var<T> add_bias<T>(Var<T>, Var<T>);                                                         \
  template Var<T> relu<T>(Var<T>);                                                                     \
  template Var<T> layer_norm<T>(Var<T>, Var<T>, Var<T>, T);                                            \
  template Var<T> dropout<T>(Var<T>, T, std::mt19937_64*);                                             \
  template Var<T> attention_core<T>(Var<T>, Var<T>, Var<T>, std::size_t, const AttentionMask&);        \
  template Var<T> label_smoothed_nll<T>(Var<T>, std::span<const int>, T, int);                         \
  template Var<T> sum<T>(Var<T>);                                                                      \
  template NllStats nll_stats<T>(const BasicTensor<T>&, std::span<const int>, double, int);            \
  template BasicTensor<T> sinusoidal_positions<T>(std::size_t, std::size_t);

AUTOSIZE_INSTANTIATE_LAYERS(float)
AUTOSIZE_INSTANTIATE_LAYERS(double)
#undef AUTOSIZE_INSTANTIATE_LAYERS

}  // namespace autosize::nn
