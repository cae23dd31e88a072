// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace autosize {

/// Lower-case hex SHA-1 of `bytes`.
std::string sha1_hex(std::string_view bytes);
/// Git's blob id: SHA-1 of "blob <size>\0" followed by the content.
std::string git_blob_hash(std::string_view content);

}  // namespace autosize
