#include "jsenet/geometry.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <unordered_map>

#include "jsenet/spatial_index.hpp"

namespace jsenet {

void PointCloud::resize(std::size_t n) {
  positions.resize(n, Vec3::Zero());
  colors.resize(n, Color::Zero());
  labels.resize(n, kIgnoreLabel);
  if (!source_indices.empty()) source_indices.resize(n, 0);
}

void PointCloud::push_back(const Vec3& position, const Color& color, std::int32_t label) {
  positions.push_back(position);
  colors.push_back(color);
  labels.push_back(label);
}

void PointCloud::validate(int num_classes) const {
  const std::size_t n = positions.size();
  require(colors.size() == n && labels.size() == n, "point cloud: per-point arrays differ in length");
  require(source_indices.empty() || source_indices.size() == n,
          "point cloud: source_indices length mismatch");
  for (const Vec3& p : positions) require(p.allFinite(), "point cloud: non-finite position");
  for (std::int32_t l : labels) {
    require(l >= kIgnoreLabel, "point cloud: label " + std::to_string(l) + " below -1");
    require(num_classes <= 0 || l < num_classes,
            "point cloud: label " + std::to_string(l) + " >= class count " + std::to_string(num_classes));
  }
}

PointCloud PointCloud::subset(std::span<const std::uint32_t> rows) const {
  PointCloud out;
  out.positions.reserve(rows.size());
  for (std::uint32_t r : rows) {
    out.push_back(positions[r], colors[r], labels[r]);
    out.source_indices.push_back(source_indices.empty() ? r : source_indices[r]);
  }
  return out;
}

void TriangleMesh::validate() const {
  const std::size_t v = vertices.size();
  for (const auto& f : faces)
    for (std::uint32_t i : f) require(i < v, "mesh: face index " + std::to_string(i) + " >= vertex count");
  require(colors.empty() || colors.size() == v, "mesh: color count mismatch");
  require(labels.empty() || labels.size() == v, "mesh: label count mismatch");
}

// ---------------------------------------------------------------- spatial index

SpatialIndex::SpatialIndex(std::span<const Vec3> positions, double cell)
    : positions_(positions.begin(), positions.end()), cell_(cell) {
  require(cell > 0, "spatial index: cell must be positive");
  for (std::uint32_t i = 0; i < positions_.size(); ++i) buckets_[cell_of(positions_[i])].push_back(i);
}

SpatialIndex::Key SpatialIndex::cell_of(const Vec3& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
          static_cast<std::int64_t>(std::floor(p.y() / cell_)),
          static_cast<std::int64_t>(std::floor(p.z() / cell_))};
}

void SpatialIndex::radius_query(const Vec3& query, double radius, std::vector<std::uint32_t>& out) const {
  require(radius > 0, "radius query: radius must be positive");
  out.clear();
  const Key lo = cell_of(query - Vec3::Constant(radius));
  const Key hi = cell_of(query + Vec3::Constant(radius));
  const double r2 = radius * radius;
  for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
    for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
      for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
        auto it = buckets_.find({x, y, z});
        if (it == buckets_.end()) continue;
        for (std::uint32_t i : it->second)
          if ((positions_[i] - query).squaredNorm() <= r2) out.push_back(i);
      }
  std::sort(out.begin(), out.end());
}

std::vector<std::uint32_t> SpatialIndex::radius_query(const Vec3& query, double radius) const {
  std::vector<std::uint32_t> out;
  radius_query(query, radius, out);
  return out;
}

IndexGroups SpatialIndex::radius_search(std::span<const Vec3> queries, double radius) const {
  IndexGroups groups;
  groups.offsets.reserve(queries.size() + 1);
  std::vector<std::uint32_t> scratch;
  for (const Vec3& q : queries) {
    radius_query(q, radius, scratch);
    groups.push_group(scratch);
  }
  return groups;
}

IndexGroups radius_neighbors(std::span<const Vec3> support, std::span<const Vec3> queries, double radius) {
  return SpatialIndex(support, radius).radius_search(queries, radius);
}

// ---------------------------------------------------------------- subsampling

SubsampleResult grid_subsample(const PointCloud& cloud, double cell) {
  require(cell > 0, "grid_subsample: cell must be positive");
  SubsampleResult result;
  const std::size_t n = cloud.size();
  if (n == 0) return result;

  struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& k) const noexcept {
      return static_cast<std::size_t>(k[0] * 73856093ll ^ k[1] * 19349663ll ^ k[2] * 83492791ll);
    }
  };
  std::unordered_map<std::array<std::int64_t, 3>, std::uint32_t, KeyHash> cells;
  result.parent.resize(n);
  std::vector<std::uint32_t> counts;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = cloud.positions[i];
    const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                                          static_cast<std::int64_t>(std::floor(p.y() / cell)),
                                          static_cast<std::int64_t>(std::floor(p.z() / cell))};
    auto [it, inserted] = cells.try_emplace(key, static_cast<std::uint32_t>(counts.size()));
    if (inserted) counts.push_back(0);
    result.parent[i] = it->second;
    ++counts[it->second];
  }

  const std::size_t m = counts.size();
  IndexGroups& members = result.members;
  members.offsets.assign(m + 1, 0);
  for (std::size_t c = 0; c < m; ++c) members.offsets[c + 1] = members.offsets[c] + counts[c];
  members.indices.resize(n);
  std::vector<std::uint32_t> fill(members.offsets.begin(), members.offsets.end() - 1);
  for (std::uint32_t i = 0; i < n; ++i) members.indices[fill[result.parent[i]]++] = i;

  PointCloud& out = result.cloud;
  out.positions.resize(m);
  out.colors.resize(m);
  out.labels.resize(m);
  std::vector<std::uint32_t> votes;
  for (std::size_t c = 0; c < m; ++c) {
    Vec3 position = Vec3::Zero();
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    votes.clear();
    for (std::uint32_t i : members.group(c)) {
      position += cloud.positions[i];
      color += cloud.colors[i].cast<double>();
      const std::int32_t label = cloud.labels[i];
      if (label >= 0) {
        if (votes.size() <= static_cast<std::size_t>(label)) votes.resize(label + 1, 0);
        ++votes[label];
      }
    }
    const double count = static_cast<double>(members.group_size(c));
    out.positions[c] = position / count;
    out.colors[c] = (color / count).cast<float>();
    std::int32_t best = kIgnoreLabel;
    std::uint32_t best_votes = 0;
    for (std::size_t l = 0; l < votes.size(); ++l) {
      if (votes[l] > best_votes) {
        best_votes = votes[l];
        best = static_cast<std::int32_t>(l);
      }
    }
    out.labels[c] = best;
  }
  return result;
}

PointCloud sample_sphere(const PointCloud& cloud, const Vec3& center, double radius) {
  require(radius > 0, "sample_sphere: radius must be positive");
  const double r2 = radius * radius;
  std::vector<std::uint32_t> rows;
  for (std::uint32_t i = 0; i < cloud.size(); ++i)
    if ((cloud.positions[i] - center).squaredNorm() <= r2) rows.push_back(i);
  return cloud.subset(rows);
}

// ---------------------------------------------------------------- mesh sampling

MeshSampling sample_mesh(const TriangleMesh& mesh, double density, std::uint64_t seed) {
  require(density > 0, "sample_mesh: density must be positive");
  mesh.validate();
  MeshSampling out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    const Vec3& a = mesh.vertices[face[0]];
    const Vec3& b = mesh.vertices[face[1]];
    const Vec3& c = mesh.vertices[face[2]];
    const double area = 0.5 * (b - a).cross(c - a).norm();
    const auto count = static_cast<std::int64_t>(std::llround(area * density));
    for (std::int64_t s = 0; s < count; ++s) {
      const double root = std::sqrt(uniform(rng));
      const double r2 = uniform(rng);
      const std::array<double, 3> w{1.0 - root, root * (1.0 - r2), root * r2};
      const auto nearest = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
      const std::uint32_t vertex = face[nearest];
      out.cloud.push_back(w[0] * a + w[1] * b + w[2] * c,
                          mesh.colors.empty() ? Color::Zero() : mesh.colors[vertex],
                          mesh.labels.empty() ? kIgnoreLabel : mesh.labels[vertex]);
      out.faces.push_back(f);
      out.barycentric.push_back(w);
    }
  }
  return out;
}

// ---------------------------------------------------------------- augmentation

PointCloud augment(const PointCloud& cloud, std::uint64_t seed, const AugmentParams& params) {
  require(params.scale_min > 0 && params.scale_min <= params.scale_max, "augment: bad scale range");
  require(params.noise_sigma >= 0, "augment: negative noise sigma");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle_dist(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> scale_dist(params.scale_min, params.scale_max);
  const double angle = params.rotate_z ? angle_dist(rng) : 0.0;
  const Vec3 scale(scale_dist(rng), scale_dist(rng), scale_dist(rng));
  const double cs = std::cos(angle), sn = std::sin(angle);

  PointCloud out = cloud;
  std::normal_distribution<double> noise(0.0, params.noise_sigma > 0 ? params.noise_sigma : 1.0);
  for (Vec3& p : out.positions) {
    const Vec3 rotated(cs * p.x() - sn * p.y(), sn * p.x() + cs * p.y(), p.z());
    p = rotated.cwiseProduct(scale);
    if (params.noise_sigma > 0) p += Vec3(noise(rng), noise(rng), noise(rng));
  }
  return out;
}

// ---------------------------------------------------------------- nearest neighbor

std::vector<std::uint32_t> nearest_indices(std::span<const Vec3> from, std::span<const Vec3> to) {
  require(!from.empty(), "nearest_indices: source cloud is empty");
  Vec3 lo = from[0], hi = from[0];
  for (const Vec3& p : from) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = (hi - lo).maxCoeff();
  const double cell = extent > 0 ? std::max(extent / std::cbrt(static_cast<double>(from.size())), 1e-9) : 1.0;

  using Key = std::array<std::int64_t, 3>;
  auto cell_of = [&](const Vec3& p) {
    return Key{static_cast<std::int64_t>(std::floor((p.x() - lo.x()) / cell)),
               static_cast<std::int64_t>(std::floor((p.y() - lo.y()) / cell)),
               static_cast<std::int64_t>(std::floor((p.z() - lo.z()) / cell))};
  };
  Key grid_max{0, 0, 0};
  for (const Vec3& p : from) {
    const Key k = cell_of(p);
    for (int a = 0; a < 3; ++a) grid_max[a] = std::max(grid_max[a], k[a]);
  }
  const std::int64_t nx = grid_max[0] + 1, ny = grid_max[1] + 1, nz = grid_max[2] + 1;
  auto flat = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    return static_cast<std::size_t>((x * ny + y) * nz + z);
  };
  // CSR buckets over the dense grid.
  std::vector<std::uint32_t> offsets(static_cast<std::size_t>(nx * ny * nz) + 1, 0);
  std::vector<std::size_t> slot(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) {
    const Key k = cell_of(from[i]);
    slot[i] = flat(k[0], k[1], k[2]);
    ++offsets[slot[i] + 1];
  }
  for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
  std::vector<std::uint32_t> bucket(from.size());
  {
    std::vector<std::uint32_t> fill(offsets.begin(), offsets.end() - 1);
    for (std::uint32_t i = 0; i < from.size(); ++i) bucket[fill[slot[i]]++] = i;
  }

  std::vector<std::uint32_t> result(to.size());
  for (std::size_t qi = 0; qi < to.size(); ++qi) {
    const Vec3& q = to[qi];
    const Key c = cell_of(q);
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_id = 0;
    auto visit = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
      const std::size_t s = flat(x, y, z);
      for (std::uint32_t j = offsets[s]; j < offsets[s + 1]; ++j) {
        const std::uint32_t id = bucket[j];
        const double d = (from[id] - q).squaredNorm();
        if (d < best || (d == best && id < best_id)) {
          best = d;
          best_id = id;
        }
      }
    };
    // Chebyshev distance from c to the farthest grid cell bounds the ring count.
    std::int64_t max_ring = 0;
    for (int a = 0; a < 3; ++a) {
      const std::int64_t lim = a == 0 ? nx - 1 : (a == 1 ? ny - 1 : nz - 1);
      max_ring = std::max({max_ring, std::abs(c[a]), std::abs(lim - c[a])});
    }
    for (std::int64_t k = 0; k <= max_ring; ++k) {
      const std::int64_t x0 = std::max<std::int64_t>(c[0] - k, 0), x1 = std::min(c[0] + k, nx - 1);
      const std::int64_t y0 = std::max<std::int64_t>(c[1] - k, 0), y1 = std::min(c[1] + k, ny - 1);
      const std::int64_t z0 = std::max<std::int64_t>(c[2] - k, 0), z1 = std::min(c[2] + k, nz - 1);
      for (std::int64_t x = x0; x <= x1; ++x)
        for (std::int64_t y = y0; y <= y1; ++y) {
          const bool shell_xy = std::abs(x - c[0]) == k || std::abs(y - c[1]) == k;
          if (shell_xy) {
            for (std::int64_t z = z0; z <= z1; ++z) visit(x, y, z);
          } else {
            if (c[2] - k >= 0 && c[2] - k <= nz - 1) visit(x, y, c[2] - k);
            if (k > 0 && c[2] + k >= 0 && c[2] + k <= nz - 1) visit(x, y, c[2] + k);
          }
        }
      const double reach = static_cast<double>(k) * cell;
      if (best < reach * reach) break;
    }
    result[qi] = best_id;
  }
  return result;
}

}  // namespace jsenet
