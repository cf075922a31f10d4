#pragma once

// Test-time voting: a regular grid of spheres covers the scene, every sphere
// is predicted independently and per-point outputs are averaged.

#include <cstdint>
#include <optional>
#include <vector>

#include "jsenet/pipeline.hpp"

namespace jsenet {

// Sums contributions in a canonical order (ascending key), so the result
// does not depend on the order in which blocks arrive.
class VoteAccumulator {
 public:
  VoteAccumulator(std::size_t points, std::size_t width);

  // rows: point ids of this block; values: rows.size() x width. Keys must be unique.
  void add(std::uint64_t key, std::vector<std::uint32_t> rows, std::vector<double> values);

  std::size_t points() const { return points_; }
  std::size_t width() const { return width_; }
  std::vector<std::uint32_t> counts() const;
  // points x width means. Throws ContractError if some point was never visited.
  std::vector<double> finalize() const;

 private:
  struct Block {
    std::uint64_t key;
    std::vector<std::uint32_t> rows;
    std::vector<double> values;
  };
  std::size_t points_;
  std::size_t width_;
  std::vector<Block> blocks_;
};

// Grid of centers with the given spacing over the bounding box, keeping the
// ones with points inside, plus one sphere per point left uncovered.
std::vector<Vec3> sphere_centers(const PointCloud& cloud, double radius, double spacing);

struct VotingOptions {
  double sphere_radius = 2.0;
  double spacing = 0.0;                      // 0: same as the radius
  std::optional<std::uint64_t> shuffle_seed;  // process spheres in a random order
  std::size_t threads = 0;                    // 0: worker_count()
};

struct ScenePrediction {
  std::size_t num_classes = 0;
  std::vector<double> probabilities;  // N x K refined mask
  std::vector<double> edges;          // N x K refined edge maps
  std::vector<std::int32_t> labels;   // argmax of the mask
  std::size_t spheres = 0;
};

// Prediction on the scene's subsampled cloud.
ScenePrediction predict_grid(const JSENet& model, const PreparedScene& scene, const VotingOptions& options);

// Same, projected to the raw points by nearest neighbor.
ScenePrediction infer_voting(const JSENet& model, const PreparedScene& scene, const VotingOptions& options);

std::vector<std::int32_t> argmax_rows(std::span<const double> values, std::size_t width);

}  // namespace jsenet
