#pragma once

// Checkpoint layout (all little-endian):
//   "JSEC" | version u32 | count u32 |
//   count x { name_len u16 | name bytes | rank u8 | extents u32[rank] | values f32[] }

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "jsenet/parameters.hpp"

namespace jsenet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointTensor>& tensors);
std::vector<CheckpointTensor> read_checkpoint(const std::filesystem::path& path);

// Serializes every entry of the store (parameters and buffers).
std::vector<CheckpointTensor> snapshot(const ParameterStore& store);
// Copies checkpoint values into matching store entries. Every store entry must
// be present with an identical shape; extra checkpoint entries are returned.
std::vector<std::string> restore(ParameterStore& store, const std::vector<CheckpointTensor>& tensors);

}  // namespace jsenet
