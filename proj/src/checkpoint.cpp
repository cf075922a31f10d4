#include "jsenet/checkpoint.hpp"

#include <fstream>
#include <limits>
#include <map>

#include "jsenet/binary_io.hpp"

namespace jsenet {

using binary::read_le;
using binary::write_le;

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open checkpoint for writing: " + path.string());
  out.write("JSEC", 4);
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const CheckpointTensor& t : tensors) {
    require(t.name.size() <= std::numeric_limits<std::uint16_t>::max(), "checkpoint: name too long");
    require(t.shape.size() <= 255, "checkpoint: rank too large");
    require(t.values.size() == shape_size(t.shape), "checkpoint: value count mismatch for " + t.name);
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t e : t.shape) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
    for (float v : t.values) write_le<float>(out, v);
  }
  if (!out) throw InputError("failed writing checkpoint " + path.string());
}

std::vector<CheckpointTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path.string());
  binary::expect_magic(in, "JSEC", "checkpoint");
  const auto version = read_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = read_le<std::uint32_t>(in, "count");
  std::vector<CheckpointTensor> tensors(count);
  for (CheckpointTensor& t : tensors) {
    const auto name_len = read_le<std::uint16_t>(in, "name length");
    t.name.resize(name_len);
    if (!in.read(t.name.data(), name_len)) throw InputError("truncated checkpoint name");
    const auto rank = read_le<std::uint8_t>(in, "rank");
    t.shape.resize(rank);
    for (auto& e : t.shape) e = read_le<std::uint32_t>(in, "extent");
    t.values.resize(shape_size(t.shape));
    for (float& v : t.values) v = read_le<float>(in, "values");
  }
  return tensors;
}

std::vector<CheckpointTensor> snapshot(const ParameterStore& store) {
  std::vector<CheckpointTensor> out;
  for (const auto& e : store.entries()) {
    CheckpointTensor t{e.name, e.tensor.shape(), {}};
    t.values.reserve(e.tensor.size());
    for (Real v : e.tensor.data()) t.values.push_back(static_cast<float>(v));
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> restore(ParameterStore& store, const std::vector<CheckpointTensor>& tensors) {
  std::map<std::string, const CheckpointTensor*, std::less<>> by_name;
  for (const auto& t : tensors) by_name.emplace(t.name, &t);
  for (auto& e : store.entries()) {
    auto it = by_name.find(e.name);
    if (it == by_name.end()) throw InputError("checkpoint is missing tensor " + e.name);
    const CheckpointTensor& t = *it->second;
    if (t.shape != e.tensor.shape()) {
      throw InputError("checkpoint tensor " + e.name + " has shape " + shape_string(t.shape) +
                       ", model expects " + shape_string(e.tensor.shape()));
    }
    auto values = e.tensor.data();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<Real>(t.values[i]);
    by_name.erase(it);
  }
  std::vector<std::string> extra;
  for (const auto& [name, t] : by_name) extra.push_back(name);
  return extra;
}

}  // namespace jsenet
