#pragma once

// Edge map generation: a_i = col_i(|M * mask - mask|), where M averages each
// point's neighbors within a small radius (the point itself included).

#include <span>

#include "jsenet/labels.hpp"
#include "jsenet/tensor.hpp"

namespace jsenet {

struct MeanFilter {
  double radius = 0.0;
  IndexGroups neighbors;  // closed ball, each list contains its own point
};

MeanFilter build_mean_filter(std::span<const Vec3> positions, double radius);

// Differentiable w.r.t. `mask` (N x K probability rows).
Tensor emg(Tape& tape, const Tensor& mask, const MeanFilter& filter);

// Ground-truth activations from a one-hot mask. Ignore rows are left out of
// the neighbor means and receive all-zero activations.
Tensor emg_gt(const OneHotMask& truth, const MeanFilter& filter);

}  // namespace jsenet
