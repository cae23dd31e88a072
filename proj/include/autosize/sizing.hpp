// SPDX-License-Identifier: Apache-2.0
//
// Row census over auto-sized parameters and physical compaction of models
// whose FFN hidden units or whole sublayers were driven to zero.
#pragma once

#include <set>
#include <string>
#include <vector>

#include "autosize/datasets.hpp"
#include "autosize/transformer.hpp"

namespace autosize::sizing {

struct RowCount {
  std::size_t rows_total = 0;
  std::size_t rows_deleted = 0;
  friend bool operator==(const RowCount&, const RowCount&) = default;
};

/// A row is deleted iff every |entry| <= tol. Throws ShapeError for non-rank-2 input.
RowCount row_census(const Tensor& w, double tol = 0.0);

struct GroupRecord {
  std::string id;
  std::size_t rows_total = 0;
  std::size_t rows_deleted = 0;
  double fraction_deleted = 0.0;
};

struct SizingReport {
  /// Sorted by parameter id.
  std::vector<GroupRecord> groups;
  std::size_t params_total = 0;
  std::size_t params_in_scope = 0;
  std::size_t params_nonzero = 0;
  double tolerance = 0.0;

  std::size_t rows_total() const;
  std::size_t rows_deleted() const;
  double fraction_deleted() const;
};

enum class Side { Encoder, Decoder, Both };
enum class Part { Ffn, All };

struct Scope {
  Side side = Side::Both;
  Part part = Part::Ffn;
  friend bool operator==(const Scope&, const Scope&) = default;
};

/// Tokens: enc-ffn, enc-all, dec-ffn, dec-all, encdec-ffn, encdec-all.
Scope parse_scope(const std::string& token);
std::string to_string(Scope s);
/// Table-style label such as "Enc+Dec FFN".
std::string scope_label(Scope s);
std::vector<Scope> all_scopes();

std::set<std::string> select_scope(const nn::ModelConfig& config, Scope scope);
std::set<std::string> select_scope(const nn::TransformerModel& model, Scope scope);

/// Census over the auto-sized parameters in `scope` (all of them when null).
SizingReport sizing_report(const nn::TransformerModel& model, double tol = 0.0,
                           const std::set<std::string>* scope = nullptr);

/// Summed census per sub-component: enc.attn, enc.ffn, dec.attn, dec.ffn.
std::vector<std::pair<std::string, RowCount>> component_census(const SizingReport& report);

/// Zeroes b1 entries whose W1 row is entirely zero. Returns how many entries changed.
std::size_t couple_ffn_biases(nn::TransformerModel& model);

struct PruneResult {
  nn::TransformerModel model;
  std::size_t units_removed = 0;
  std::vector<std::string> sublayers_bypassed;
};

/// Removes zero-W1 hidden units and replaces dead sublayers by pass-throughs.
/// Throws PruneError when a removed unit still has a nonzero b1 entry.
PruneResult prune_model(const nn::TransformerModel& model);

/// Max |logit difference| over teacher-forced probes, dropout off.
double verify_prune_equivalence(nn::TransformerModel& original, nn::TransformerModel& pruned,
                                const std::vector<data::SentencePair>& probes);

/// 2*d*f + f + d summed over FFNs that hold parameters.
std::size_t ffn_parameter_count(const nn::ModelConfig& config);
/// Attention projections and biases across all blocks.
std::size_t attention_parameter_count(const nn::ModelConfig& config);

}  // namespace autosize::sizing
