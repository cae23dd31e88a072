// SPDX-License-Identifier: Apache-2.0
#include "autosize/sizing.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "autosize/errors.hpp"

namespace autosize::sizing {

namespace {

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

bool is_ffn(const std::string& id) { return id.find(".ffn.") != std::string::npos; }

bool all_zero(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; });
}

std::string component_of(const std::string& id) {
  const std::string side = starts_with(id, "enc.") ? "enc" : "dec";
  return side + (is_ffn(id) ? ".ffn" : ".attn");
}

}  // namespace

RowCount row_census(const Tensor& w, double tol) {
  require_rank2(w, "row_census");
  if (!(tol >= 0.0)) throw InvalidInput("row_census: tolerance must be >= 0");
  RowCount c;
  c.rows_total = w.rows();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    if (std::all_of(row.begin(), row.end(), [&](float x) { return std::abs(static_cast<double>(x)) <= tol; })) {
      ++c.rows_deleted;
    }
  }
  return c;
}

std::size_t SizingReport::rows_total() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.rows_total;
  return n;
}

std::size_t SizingReport::rows_deleted() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.rows_deleted;
  return n;
}

double SizingReport::fraction_deleted() const {
  const auto total = rows_total();
  return total == 0 ? 0.0 : static_cast<double>(rows_deleted()) / static_cast<double>(total);
}

Scope parse_scope(const std::string& token) {
  for (auto s : all_scopes()) {
    if (to_string(s) == token) return s;
  }
  throw ConfigError("unknown scope '" + token + "' (expected enc-ffn, enc-all, dec-ffn, dec-all, encdec-ffn, encdec-all)");
}

std::string to_string(Scope s) {
  const char* side = s.side == Side::Encoder ? "enc" : s.side == Side::Decoder ? "dec" : "encdec";
  return std::string(side) + (s.part == Part::Ffn ? "-ffn" : "-all");
}

std::string scope_label(Scope s) {
  const char* side = s.side == Side::Encoder ? "Encoder" : s.side == Side::Decoder ? "Decoder" : "Enc+Dec";
  return std::string(side) + (s.part == Part::Ffn ? " FFN" : " All");
}

std::vector<Scope> all_scopes() {
  return {{Side::Encoder, Part::All}, {Side::Encoder, Part::Ffn}, {Side::Decoder, Part::All},
          {Side::Decoder, Part::Ffn}, {Side::Both, Part::All},    {Side::Both, Part::Ffn}};
}

std::set<std::string> select_scope(const nn::ModelConfig& config, Scope scope) {
  std::set<std::string> out;
  for (const auto& [id, spec] : nn::parameter_layout(config)) {
    if (!spec.auto_sized) continue;
    const bool enc = starts_with(id, "enc.");
    if (scope.side == Side::Encoder && !enc) continue;
    if (scope.side == Side::Decoder && enc) continue;
    if (scope.part == Part::Ffn && !is_ffn(id)) continue;
    out.insert(id);
  }
  return out;
}

std::set<std::string> select_scope(const nn::TransformerModel& model, Scope scope) {
  return select_scope(model.config(), scope);
}

SizingReport sizing_report(const nn::TransformerModel& model, double tol, const std::set<std::string>* scope) {
  SizingReport r;
  r.tolerance = tol;
  for (const auto& [id, p] : model.parameters()) {
    r.params_total += p.value.size();
    if (!p.auto_sized || (scope && !scope->count(id))) continue;
    const auto c = row_census(p.value, tol);
    r.groups.push_back({id, c.rows_total, c.rows_deleted,
                        static_cast<double>(c.rows_deleted) / static_cast<double>(c.rows_total)});
    r.params_in_scope += p.value.size();
    for (float v : p.value.values()) r.params_nonzero += v != 0.0f;
  }
  return r;
}

std::vector<std::pair<std::string, RowCount>> component_census(const SizingReport& report) {
  std::map<std::string, RowCount> sums;
  for (const auto& g : report.groups) {
    auto& s = sums[component_of(g.id)];
    s.rows_total += g.rows_total;
    s.rows_deleted += g.rows_deleted;
  }
  return {sums.begin(), sums.end()};
}

std::size_t couple_ffn_biases(nn::TransformerModel& model) {
  std::size_t changed = 0;
  for (auto& [id, p] : model.parameters()) {
    if (id.size() < 3 || id.compare(id.size() - 3, 3, ".W1") != 0) continue;
    auto& b1 = model.param(id.substr(0, id.size() - 3) + ".b1").value;
    for (std::size_t r = 0; r < p.value.rows(); ++r) {
      if (b1[r] != 0.0f && all_zero(p.value.row(r))) {
        b1[r] = 0.0f;
        ++changed;
      }
    }
  }
  return changed;
}

PruneResult prune_model(const nn::TransformerModel& model) {
  auto config = model.config();
  std::map<std::string, Tensor> values;
  for (const auto& [id, p] : model.parameters()) values.emplace(id, p.value);
  PruneResult result;

  auto drop_prefix = [&](const std::string& prefix) {
    for (auto it = values.begin(); it != values.end();) {
      it = starts_with(it->first, prefix + ".") ? values.erase(it) : std::next(it);
    }
  };

  const std::size_t layers = config.encoder_layers + config.decoder_layers;
  for (std::size_t l = 0; l < layers; ++l) {
    const bool dec = l >= config.encoder_layers;
    const std::string layer = (dec ? "dec." : "enc.") + std::to_string(dec ? l - config.encoder_layers : l);

    for (const char* block : {"self_attn", "cross_attn"}) {
      const std::string pre = layer + "." + block;
      if (!values.count(pre + ".Wo")) continue;
      const auto& wo = values.at(pre + ".Wo");
      const auto& bo = values.at(pre + ".bo");
      if (all_zero(wo.values()) && all_zero(bo.values())) {
        drop_prefix(pre);
        config.bypassed.insert(pre);
        result.sublayers_bypassed.push_back(pre);
      }
    }

    const std::string ffn = layer + ".ffn";
    if (!values.count(ffn + ".W1")) continue;
    const auto& w1 = values.at(ffn + ".W1");
    const auto& b1 = values.at(ffn + ".b1");
    const auto& w2 = values.at(ffn + ".W2");
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < w1.rows(); ++r) {
      if (!all_zero(w1.row(r))) {
        keep.push_back(r);
      } else if (b1[r] != 0.0f) {
        throw PruneError("prune: " + ffn + " hidden unit " + std::to_string(r) +
                         " has a zero W1 row but b1 = " + std::to_string(b1[r]) + "; removing it would change outputs");
      }
    }
    if (keep.size() == w1.rows()) continue;
    result.units_removed += w1.rows() - keep.size();
    config.ffn_dims[l] = keep.size();
    const std::size_t d = w1.cols();
    if (keep.empty()) {
      const bool b2_zero = all_zero(values.at(ffn + ".b2").values());
      values.erase(ffn + ".W1");
      values.erase(ffn + ".b1");
      values.erase(ffn + ".W2");
      if (b2_zero) {
        values.erase(ffn + ".b2");
        config.bypassed.insert(ffn);
        result.sublayers_bypassed.push_back(ffn);
      }
      continue;
    }
    Tensor nw1({keep.size(), d}), nb1({keep.size()}), nw2({d, keep.size()});
    for (std::size_t k = 0; k < keep.size(); ++k) {
      std::copy(w1.row(keep[k]).begin(), w1.row(keep[k]).end(), nw1.row(k).begin());
      nb1[k] = b1[keep[k]];
      for (std::size_t j = 0; j < d; ++j) nw2.at(j, k) = w2.at(j, keep[k]);
    }
    values[ffn + ".W1"] = std::move(nw1);
    values[ffn + ".b1"] = std::move(nb1);
    values[ffn + ".W2"] = std::move(nw2);
  }
  result.model = nn::TransformerModel(config, std::move(values));
  return result;
}

double verify_prune_equivalence(nn::TransformerModel& original, nn::TransformerModel& pruned,
                                const std::vector<data::SentencePair>& probes) {
  if (probes.empty()) throw InvalidInput("verify_prune_equivalence: empty probe set");
  if (original.config().vocab_size != pruned.config().vocab_size) {
    throw ShapeError("verify_prune_equivalence: vocabulary sizes differ");
  }
  double worst = 0.0;
  for (const auto& batch : data::ordered_batches(probes, 50)) {
    nn::Tape<float> ta(false), tb(false);
    const auto& la = original.forward(ta, batch.tokens).value();
    const auto& lb = pruned.forward(tb, batch.tokens).value();
    if (la.shape() != lb.shape()) throw ShapeError("verify_prune_equivalence: logit shapes differ");
    const std::size_t V = la.cols();
    for (std::size_t r = 0; r < la.rows(); ++r) {
      if (!batch.tgt_mask[r]) continue;
      for (std::size_t j = 0; j < V; ++j) {
        worst = std::max(worst, std::abs(static_cast<double>(la.at(r, j)) - static_cast<double>(lb.at(r, j))));
      }
    }
  }
  return worst;
}

std::size_t ffn_parameter_count(const nn::ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& [id, spec] : nn::parameter_layout(config)) {
    if (is_ffn(id)) n += shape_size(spec.shape);
  }
  return n;
}

std::size_t attention_parameter_count(const nn::ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& [id, spec] : nn::parameter_layout(config)) {
    if (id.find("_attn.") != std::string::npos) n += shape_size(spec.shape);
  }
  return n;
}

}  // namespace autosize::sizing
