// SPDX-License-Identifier: Apache-2.0
#include "autosize/hashing.hpp"

#include <openssl/evp.h>

#include <memory>
#include <stdexcept>

namespace autosize {

std::string sha1_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("sha1: digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string git_blob_hash(std::string_view content) {
  std::string buf = "blob " + std::to_string(content.size());
  buf.push_back('\0');
  buf.append(content);
  return sha1_hex(buf);
}

}  // namespace autosize
