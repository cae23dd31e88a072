// SPDX-License-Identifier: Apache-2.0
//
// Model checkpoint layout, all integers u32 little-endian:
//
//   "AUTOSIZE1"
//   config text length, config text (key-sorted key=value lines)
//   parameter count
//   per parameter, sorted by name:
//     name length, name bytes, rank, dims..., float32 LE values (row-major)
#pragma once

#include <string>
#include <string_view>

#include "autosize/transformer.hpp"

namespace autosize {

inline constexpr std::string_view kCheckpointMagic = "AUTOSIZE1";

std::string serialize_model(const nn::TransformerModel& model);
/// Throws FormatError on a bad magic string, truncation, or a layout mismatch.
nn::TransformerModel deserialize_model(std::string_view bytes);

void save_checkpoint(const nn::TransformerModel& model, const std::string& path);
nn::TransformerModel load_checkpoint(const std::string& path);

}  // namespace autosize
