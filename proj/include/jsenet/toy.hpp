#pragma once

// Synthetic three-class room: a 2 m x 2 m floor (class 0) with two 0.5 m
// boxes standing on it (classes 1 and 2). Used by the overfitting checks.

#include <cstdint>

#include "jsenet/geometry.hpp"

namespace jsenet {

inline constexpr int kToyClasses = 3;

TriangleMesh make_toy_mesh();

// Mesh samples at `density` points per square meter, floor samples hidden
// under the boxes removed, colors jittered by `color_noise`.
PointCloud make_toy_scene(std::uint64_t seed, double density = 5000.0, double color_noise = 0.03);

}  // namespace jsenet
