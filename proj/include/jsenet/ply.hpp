#pragma once

// PLY reading and writing for labeled clouds and triangle meshes.
// Supports ascii and binary_little_endian. Vertex properties x,y,z are
// written as float, red,green,blue as uchar and label as int (-1 = ignore).

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jsenet/geometry.hpp"

namespace jsenet {

enum class PlyFormat { kAscii, kBinaryLittleEndian };

struct PlyProperty {
  std::string name;
  std::vector<double> values;
};

struct PlyData {
  std::size_t vertex_count = 0;
  std::vector<PlyProperty> vertex_properties;   // header order
  std::vector<std::array<std::uint32_t, 3>> faces;

  const std::vector<double>* find(const std::string& name) const;
};

PlyData read_ply_data(const std::filesystem::path& path);

// Cloud from the vertex element; missing colors become black, missing labels -1.
PointCloud read_ply_cloud(const std::filesystem::path& path);
TriangleMesh read_ply_mesh(const std::filesystem::path& path);

// Extra per-vertex float properties, written after the standard ones.
struct ExtraProperty {
  std::string name;
  std::vector<float> values;
};

void write_ply_cloud(const std::filesystem::path& path, const PointCloud& cloud,
                     PlyFormat format = PlyFormat::kBinaryLittleEndian,
                     const std::vector<ExtraProperty>& extra = {});
void write_ply_mesh(const std::filesystem::path& path, const TriangleMesh& mesh,
                    PlyFormat format = PlyFormat::kBinaryLittleEndian);

}  // namespace jsenet
