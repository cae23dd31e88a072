// SPDX-License-Identifier: Apache-2.0
#include "autosize/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include "autosize/binary_io.hpp"
#include "autosize/errors.hpp"

namespace autosize {

namespace io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, std::string_view bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

}  // namespace io

std::string serialize_model(const nn::TransformerModel& model) {
  io::ByteWriter w;
  w.raw(kCheckpointMagic);
  w.str(model.config().to_canonical_text());
  w.u32(static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& [id, p] : model.parameters()) {
    w.str(id);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : p.value.values()) w.f32(v);
  }
  return w.take();
}

nn::TransformerModel deserialize_model(std::string_view bytes) {
  io::ByteReader r(bytes, "checkpoint");
  if (bytes.size() < kCheckpointMagic.size() || r.raw(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw FormatError("checkpoint: bad magic string (expected AUTOSIZE1)");
  }
  const auto config = nn::ModelConfig::from_canonical_text(r.str());
  const auto count = r.u32();
  std::map<std::string, Tensor> values;
  std::string previous;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.str();
    if (i > 0 && name <= previous) throw FormatError("checkpoint: parameter records not in sorted order at " + name);
    const auto rank = r.u32();
    if (rank == 0 || rank > 2) throw FormatError("checkpoint: parameter " + name + " has unsupported rank");
    Shape shape;
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      shape.push_back(r.u32());
      if (shape.back() == 0) throw FormatError("checkpoint: parameter " + name + " has a zero dimension");
      n *= shape.back();
    }
    if (r.remaining() / 4 < n) throw FormatError("checkpoint: truncated values for " + name);
    std::vector<float> data(n);
    for (auto& v : data) v = r.f32();
    previous = name;
    values.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes after the last parameter");
  return nn::TransformerModel(config, std::move(values));
}

void save_checkpoint(const nn::TransformerModel& model, const std::string& path) {
  io::write_file(path, serialize_model(model));
}

nn::TransformerModel load_checkpoint(const std::string& path) { return deserialize_model(io::read_file(path)); }

}  // namespace autosize
