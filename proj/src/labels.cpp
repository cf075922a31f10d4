#include "jsenet/labels.hpp"

#include <spdlog/spdlog.h>

#include <fstream>

#include "jsenet/binary_io.hpp"
#include "jsenet/spatial_index.hpp"

namespace jsenet {

SemanticEdgeLabels generate_edge_labels(const PointCloud& cloud, int num_classes, double radius) {
  return generate_edge_labels(cloud.positions, cloud.labels, num_classes, radius);
}

SemanticEdgeLabels generate_edge_labels(std::span<const Vec3> positions,
                                        std::span<const std::int32_t> labels, int num_classes,
                                        double radius) {
  require(radius > 0, "generate_edge_labels: radius must be positive");
  require(num_classes > 0 && num_classes <= kMaxClasses, "generate_edge_labels: class count out of range");
  require(positions.size() == labels.size(), "generate_edge_labels: label count mismatch");
  SemanticEdgeLabels out;
  out.num_classes = num_classes;
  out.masks.assign(positions.size(), 0);

  bool any_valid = false;
  for (std::int32_t l : labels) {
    require(l >= kIgnoreLabel && l < num_classes, "generate_edge_labels: label out of range");
    any_valid = any_valid || l >= 0;
  }
  if (!any_valid) {
    if (!labels.empty()) spdlog::warn("generate_edge_labels: cloud has no labeled points");
    return out;
  }

  const SpatialIndex index(positions, radius);
  std::vector<std::uint32_t> neighbors;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const std::int32_t own = labels[i];
    if (own < 0) continue;
    index.radius_query(positions[i], radius, neighbors);
    std::uint64_t present = 0;
    bool differs = false;
    for (std::uint32_t j : neighbors) {
      const std::int32_t l = labels[j];
      differs = differs || l != own;
      if (l >= 0) present |= std::uint64_t{1} << l;
    }
    if (differs) out.masks[i] = present;
  }
  return out;
}

SemanticEdgeLabels transfer_edge_labels(const SemanticEdgeLabels& fine, const IndexGroups& members) {
  SemanticEdgeLabels out;
  out.num_classes = fine.num_classes;
  out.masks.assign(members.size(), 0);
  for (std::size_t c = 0; c < members.size(); ++c)
    for (std::uint32_t i : members.group(c)) {
      require(i < fine.size(), "transfer_edge_labels: member index out of range");
      out.masks[c] |= fine.masks[i];
    }
  return out;
}

std::vector<std::uint8_t> to_binary_edges(const SemanticEdgeLabels& labels) {
  std::vector<std::uint8_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels.masks[i] != 0;
  return out;
}

std::size_t OneHotMask::valid_count() const {
  std::size_t n = 0;
  for (std::uint8_t f : ignore) n += f == 0;
  return n;
}

OneHotMask one_hot(std::span<const std::int32_t> labels, int num_classes) {
  require(num_classes > 0, "one_hot: class count must be positive");
  OneHotMask mask;
  mask.values = Tensor::zeros({labels.size(), static_cast<std::size_t>(num_classes)});
  mask.ignore.assign(labels.size(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::int32_t l = labels[i];
    if (l >= num_classes || l < kIgnoreLabel) {
      throw ContractError("one_hot: label " + std::to_string(l) + " outside {-1, 0.." +
                          std::to_string(num_classes - 1) + "}");
    }
    if (l < 0) {
      mask.ignore[i] = 1;
    } else {
      mask.values.at(i, static_cast<std::size_t>(l)) = 1;
    }
  }
  return mask;
}

SkewWeights skew_weights(const SemanticEdgeLabels& labels, std::span<const std::uint8_t> valid) {
  require(valid.empty() || valid.size() == labels.size(), "skew_weights: mask length mismatch");
  const int k = labels.num_classes;
  std::vector<std::size_t> unset(static_cast<std::size_t>(k), 0);
  std::size_t clean = 0, n = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!valid.empty() && !valid[i]) continue;
    ++n;
    const std::uint64_t m = labels.masks[i];
    clean += m == 0;
    for (int c = 0; c < k; ++c) unset[c] += ((m >> c) & 1u) == 0;
  }
  require(n > 0, "skew_weights: no points");
  SkewWeights w;
  w.per_class.resize(unset.size());
  for (std::size_t c = 0; c < unset.size(); ++c) w.per_class[c] = double(unset[c]) / double(n);
  w.overall = double(clean) / double(n);
  return w;
}

void write_edge_labels(const std::filesystem::path& path, const SemanticEdgeLabels& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open edge label file for writing: " + path.string());
  out.write("SEPM", 4);
  binary::write_le<std::uint32_t>(out, kEdgeFileVersion);
  binary::write_le<std::uint64_t>(out, labels.size());
  binary::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(labels.num_classes));
  for (std::uint64_t m : labels.masks) binary::write_le<std::uint64_t>(out, m);
  if (!out) throw InputError("failed writing " + path.string());
}

SemanticEdgeLabels read_edge_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open edge label file: " + path.string());
  binary::expect_magic(in, "SEPM", "edge label");
  const auto version = binary::read_le<std::uint32_t>(in, "version");
  if (version != kEdgeFileVersion) throw InputError("unsupported edge label version " + std::to_string(version));
  const auto n = binary::read_le<std::uint64_t>(in, "point count");
  SemanticEdgeLabels labels;
  labels.num_classes = binary::read_le<std::uint16_t>(in, "class count");
  if (labels.num_classes > kMaxClasses) throw InputError("edge label file: too many classes");
  labels.masks.resize(n);
  for (auto& m : labels.masks) m = binary::read_le<std::uint64_t>(in, "bitmask");
  return labels;
}

}  // namespace jsenet
