#pragma once

// Ground-truth construction: semantic edge bitmasks, binary edge maps,
// one-hot masks and the per-cloud skew weights of the edge losses.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "jsenet/geometry.hpp"
#include "jsenet/tensor.hpp"

namespace jsenet {

inline constexpr int kMaxClasses = 64;
inline constexpr double kDefaultEdgeRadius = 0.02;

// Bit k of masks[i] is set when point i lies on an edge of class k.
struct SemanticEdgeLabels {
  std::vector<std::uint64_t> masks;
  int num_classes = 0;

  std::size_t size() const { return masks.size(); }
  bool has(std::size_t point, int label) const { return (masks[point] >> label) & 1u; }
};

// A labeled point becomes an edge point when some point within `radius`
// (closed ball, itself included) carries a different label, ignore included;
// it then receives the bits of every valid class present in that ball. Ignore
// points never carry bits themselves.
SemanticEdgeLabels generate_edge_labels(const PointCloud& cloud, int num_classes,
                                        double radius = kDefaultEdgeRadius);
SemanticEdgeLabels generate_edge_labels(std::span<const Vec3> positions,
                                        std::span<const std::int32_t> labels, int num_classes,
                                        double radius = kDefaultEdgeRadius);

// Bitwise OR of the member masks of every subsampled point.
SemanticEdgeLabels transfer_edge_labels(const SemanticEdgeLabels& fine, const IndexGroups& members);

std::vector<std::uint8_t> to_binary_edges(const SemanticEdgeLabels& labels);

struct OneHotMask {
  Tensor values;                     // N x K, no gradient
  std::vector<std::uint8_t> ignore;  // 1 for rows labeled -1 (all-zero rows)

  std::size_t rows() const { return ignore.size(); }
  std::size_t valid_count() const;
};

OneHotMask one_hot(std::span<const std::int32_t> labels, int num_classes);

struct SkewWeights {
  std::vector<double> per_class;  // beta_k: fraction of points without bit k
  double overall = 1.0;           // beta: fraction of points with no bits
};

// Weights over the points with valid[i] != 0 (all points when `valid` is empty).
SkewWeights skew_weights(const SemanticEdgeLabels& labels, std::span<const std::uint8_t> valid = {});

// Edge label file: "SEPM" | version u32 | N u64 | K u16 | N x u64 bitmasks (little-endian).
inline constexpr std::uint32_t kEdgeFileVersion = 1;
void write_edge_labels(const std::filesystem::path& path, const SemanticEdgeLabels& labels);
SemanticEdgeLabels read_edge_labels(const std::filesystem::path& path);

}  // namespace jsenet
