#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "jsenet/tensor.hpp"

namespace jsenet {

using Vec3 = Eigen::Vector3d;
using Color = Eigen::Vector3f;

inline constexpr std::int32_t kIgnoreLabel = -1;

// Positions in meters, colors in [0, 1], labels in {-1, 0..K-1}.
// source_indices, when present, maps each point to its row in the cloud it
// was cut from.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Color> colors;
  std::vector<std::int32_t> labels;
  std::vector<std::uint32_t> source_indices;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }

  // Resizes every per-point array to n (colors black, labels ignore).
  void resize(std::size_t n);
  void push_back(const Vec3& position, const Color& color = Color::Zero(),
                 std::int32_t label = kIgnoreLabel);
  // Throws ContractError on mismatched lengths, non-finite positions or
  // labels outside {-1, 0..num_classes-1} (label range checked when num_classes > 0).
  void validate(int num_classes = 0) const;
  PointCloud subset(std::span<const std::uint32_t> rows) const;
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::vector<Color> colors;             // per vertex, may be empty
  std::vector<std::int32_t> labels;      // per vertex, may be empty

  void validate() const;
};

struct SubsampleResult {
  PointCloud cloud;
  IndexGroups members;               // input rows of each output point, ascending
  std::vector<std::uint32_t> parent; // output point of each input row
};

// One point per nonempty cell floor(p / cell): barycenter position, mean
// color, majority label (lowest class id on ties, -1 only if all members are
// -1). Output order is the order in which cells are first hit.
SubsampleResult grid_subsample(const PointCloud& cloud, double cell);

// Points inside the closed ball; source_indices refer to rows of `cloud`
// (composed with cloud.source_indices when it has them).
PointCloud sample_sphere(const PointCloud& cloud, const Vec3& center, double radius);

struct MeshSampling {
  PointCloud cloud;
  std::vector<std::uint32_t> faces;              // source face per sample
  std::vector<std::array<double, 3>> barycentric;
};

// round(area * density) samples per face, uniform in barycentric measure.
// Color and label come from the vertex with the largest barycentric weight.
MeshSampling sample_mesh(const TriangleMesh& mesh, double density, std::uint64_t seed = 0);

struct AugmentParams {
  bool rotate_z = true;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double noise_sigma = 0.001;

  static AugmentParams identity() { return {false, 1.0, 1.0, 0.0}; }
};

// Random rotation about the vertical axis, random per-axis scaling, then
// Gaussian positional noise. Colors and labels are untouched.
PointCloud augment(const PointCloud& cloud, std::uint64_t seed,
                   const AugmentParams& params = AugmentParams{});

// For each `to` point, the row of its nearest `from` point (ties: lowest row).
std::vector<std::uint32_t> nearest_indices(std::span<const Vec3> from, std::span<const Vec3> to);

// Copies per-from-point rows (`width` values each) onto the `to` points.
template <typename T>
std::vector<T> project_nearest(std::span<const Vec3> from, std::span<const Vec3> to,
                               std::span<const T> values, std::size_t width = 1) {
  require(!from.empty(), "project_nearest: source cloud is empty");
  require(values.size() == from.size() * width, "project_nearest: value count mismatch");
  const auto nearest = nearest_indices(from, to);
  std::vector<T> out(to.size() * width);
  for (std::size_t i = 0; i < to.size(); ++i)
    for (std::size_t c = 0; c < width; ++c) out[i * width + c] = values[nearest[i] * width + c];
  return out;
}

}  // namespace jsenet
