// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "autosize/binary_io.hpp"
#include "autosize/checkpoint.hpp"
#include "autosize/errors.hpp"
#include "autosize/hashing.hpp"

using namespace autosize;

namespace {

nn::ModelConfig cfg() {
  nn::ModelConfig c;
  c.d_model = 8;
  c.heads = 2;
  c.ffn_dims = {6, 5};
  c.vocab_size = 9;
  c.max_len = 6;
  return c;
}

}  // namespace

TEST_CASE("round trip is bit exact") {
  nn::TransformerModel m(cfg(), 3);
  const auto bytes = serialize_model(m);
  const auto back = deserialize_model(bytes);
  CHECK(back.config() == m.config());
  for (const auto& [id, p] : m.parameters()) {
    CHECK(std::memcmp(back.param(id).value.data(), p.value.data(), p.value.size() * sizeof(float)) == 0);
    CHECK(back.param(id).auto_sized == p.auto_sized);
  }
  CHECK(serialize_model(back) == bytes);

  const auto dir = std::filesystem::temp_directory_path() / "autosize_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "m.ckpt").string();
  save_checkpoint(m, path);
  CHECK(serialize_model(load_checkpoint(path)) == bytes);
  std::filesystem::remove_all(dir);
}

TEST_CASE("layout of the header") {
  nn::TransformerModel m(cfg(), 3);
  const auto bytes = serialize_model(m);
  CHECK(bytes.substr(0, 9) == "AUTOSIZE1");
  io::ByteReader r(bytes, "t");
  r.raw(9);
  CHECK(r.str() == m.config().to_canonical_text());
  CHECK(r.u32() == m.parameters().size());
  CHECK(r.str() == m.parameters().begin()->first);
  CHECK(r.u32() == m.parameters().begin()->second.value.rank());
}

TEST_CASE("corruption is a format error") {
  nn::TransformerModel m(cfg(), 3);
  auto bytes = serialize_model(m);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_model(bad), FormatError);
  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(deserialize_model(bytes + "z"), FormatError);
  CHECK_THROWS_AS(deserialize_model(""), FormatError);
}

TEST_CASE("sha1 and git blob ids") {
  CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_hash("hello world\n") == "3b18e512dba79e4c8300dd08aeb37f8e728b8dad");
}
