#include "jsenet/edgegen.hpp"

#include <algorithm>
#include <cmath>

#include "jsenet/spatial_index.hpp"

namespace jsenet {

MeanFilter build_mean_filter(std::span<const Vec3> positions, double radius) {
  require(radius > 0, "mean filter: radius must be positive");
  MeanFilter filter;
  filter.radius = radius;
  filter.neighbors = radius_neighbors(positions, positions, radius);
  return filter;
}

namespace {

void check_filter(const MeanFilter& filter, std::size_t rows) {
  if (filter.neighbors.size() != rows) {
    throw DimensionError("emg: filter has " + std::to_string(filter.neighbors.size()) +
                         " neighbor lists for " + std::to_string(rows) + " points");
  }
  for (std::size_t p = 0; p < rows; ++p) {
    auto group = filter.neighbors.group(p);
    if (group.empty() || !std::binary_search(group.begin(), group.end(), static_cast<std::uint32_t>(p))) {
      throw ContractError("emg: neighbor list of point " + std::to_string(p) + " does not contain the point");
    }
  }
}

}  // namespace

Tensor emg(Tape& tape, const Tensor& mask, const MeanFilter& filter) {
  check_filter(filter, mask.rows());
  return ops::abs(tape, ops::mean_deviation_over_index_groups(tape, mask, filter.neighbors));
}

Tensor emg_gt(const OneHotMask& truth, const MeanFilter& filter) {
  const std::size_t n = truth.rows();
  check_filter(filter, n);
  const std::size_t k = truth.values.cols();
  Tensor out = Tensor::zeros({n, k});
  auto values = truth.values.data();
  auto o = out.data();
  std::vector<Real> acc(k);
  for (std::size_t p = 0; p < n; ++p) {
    if (truth.ignore[p]) continue;
    std::fill(acc.begin(), acc.end(), Real(0));
    std::size_t count = 0;
    for (std::uint32_t q : filter.neighbors.group(p)) {
      if (truth.ignore[q]) continue;
      ++count;
      for (std::size_t c = 0; c < k; ++c) acc[c] += values[q * k + c] - values[p * k + c];
    }
    // Same operation order as the emg op, so results agree bit for bit.
    for (std::size_t c = 0; c < k; ++c) o[p * k + c] = std::abs(acc[c] / static_cast<Real>(count));
  }
  return out;
}

}  // namespace jsenet
