#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "jsenet/geometry.hpp"

namespace jsenet {

// Uniform-grid hash over a fixed set of positions. Immutable after
// construction, so concurrent queries are safe.
class SpatialIndex {
 public:
  SpatialIndex(std::span<const Vec3> positions, double cell);

  // Ids of all points with |p - query| <= radius, ascending.
  std::vector<std::uint32_t> radius_query(const Vec3& query, double radius) const;
  void radius_query(const Vec3& query, double radius, std::vector<std::uint32_t>& out) const;

  // Neighbor lists for a batch of queries.
  IndexGroups radius_search(std::span<const Vec3> queries, double radius) const;

  double cell() const { return cell_; }
  std::size_t size() const { return positions_.size(); }
  std::span<const Vec3> positions() const { return positions_; }

 private:
  using Key = std::array<std::int64_t, 3>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return static_cast<std::size_t>(k[0] * 73856093ll ^ k[1] * 19349663ll ^ k[2] * 83492791ll);
    }
  };
  Key cell_of(const Vec3& p) const;

  std::vector<Vec3> positions_;
  double cell_;
  std::unordered_map<Key, std::vector<std::uint32_t>, KeyHash> buckets_;
};

// Neighbor lists of `queries` among `support` within the closed ball of `radius`.
IndexGroups radius_neighbors(std::span<const Vec3> support, std::span<const Vec3> queries,
                             double radius);

}  // namespace jsenet
