#include "jsenet/selftest.hpp"

#include <fmt/format.h>

#include "jsenet/labels.hpp"
#include "jsenet/metrics.hpp"
#include "jsenet/ply.hpp"
#include "jsenet/spatial_index.hpp"

namespace jsenet {

namespace {

const std::vector<double>& property(const PlyData& ply, const std::string& name) {
  const auto* p = ply.find(name);
  if (!p) throw InputError("selftest fixture has no vertex property " + name);
  return *p;
}

std::vector<std::int32_t> as_labels(const std::vector<double>& v) {
  std::vector<std::int32_t> out;
  for (double x : v) out.push_back(static_cast<std::int32_t>(x));
  return out;
}

}  // namespace

std::string selftest_report(const std::filesystem::path& fixture, const SelftestSettings& s) {
  const PlyData ply = read_ply_data(fixture);
  const std::size_t n = ply.vertex_count;
  const int k = s.num_classes;
  PointCloud cloud;
  cloud.resize(n);
  const auto &x = property(ply, "x"), &y = property(ply, "y"), &z = property(ply, "z");
  for (std::size_t i = 0; i < n; ++i) cloud.positions[i] = Vec3(x[i], y[i], z[i]);
  cloud.labels = as_labels(property(ply, "label"));
  const std::vector<std::int32_t> pred = as_labels(property(ply, "pred"));
  cloud.validate(k);

  std::string out = fmt::format("points = {}\nclasses = {}\n", n, k);

  const SemanticEdgeLabels edges = generate_edge_labels(cloud, k, s.edge_radius);
  std::size_t edge_points = 0;
  for (auto m : edges.masks) edge_points += m != 0;
  out += fmt::format("edge_points = {}\n", edge_points);
  for (int c = 0; c < k; ++c) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) count += edges.has(i, c);
    out += fmt::format("edge_bits_{} = {}\n", c, count);
  }
  for (std::size_t i = 0; i < n; ++i) out += fmt::format("edge_mask_{} = {}\n", i, edges.masks[i]);

  const IndexGroups nb = radius_neighbors(cloud.positions, cloud.positions, s.neighbor_radius);
  std::uint64_t id_sum = 0;
  for (std::uint32_t id : nb.indices) id_sum += id;
  out += fmt::format("neighbor_pairs = {}\nneighbor_id_sum = {}\n", nb.total(), id_sum);

  const SubsampleResult sub = grid_subsample(cloud, s.subsample_cell);
  Vec3 centroid_sum = Vec3::Zero();
  for (const Vec3& p : sub.cloud.positions) centroid_sum += p;
  out += fmt::format("subsample_points = {}\n", sub.cloud.size());
  out += fmt::format("subsample_centroid_sum = {:.9f} {:.9f} {:.9f}\n", centroid_sum.x(), centroid_sum.y(),
                     centroid_sum.z());
  std::string sub_labels;
  for (auto l : sub.cloud.labels) sub_labels += fmt::format("{} ", l);
  if (!sub_labels.empty()) sub_labels.pop_back();
  out += "subsample_labels = " + sub_labels + "\n";

  const IouReport iou = miou(pred, cloud.labels, k);
  for (int c = 0; c < k; ++c) out += fmt::format("iou_{} = {:.6f}\n", c, iou.per_class[static_cast<std::size_t>(c)]);
  out += fmt::format("miou = {:.6f}\n", iou.mean);

  std::vector<double> scores(n * static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    const auto& col = property(ply, "score_" + std::to_string(c));
    for (std::size_t i = 0; i < n; ++i) scores[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)] = col[i];
  }
  ThresholdSweep sweep(k);
  sweep.add(scores, edges);
  const MfReport mf = mf_ods(sweep);
  for (int c = 0; c < k; ++c) out += fmt::format("mf_{} = {:.6f}\n", c, mf.per_class[static_cast<std::size_t>(c)]);
  out += fmt::format("mmf = {:.6f}\n", mf.mean);

  const BoundaryScore bf = boundary_fscore(cloud.positions, pred, cloud.labels, k, s.edge_radius);
  out += fmt::format("boundary_precision = {:.6f}\nboundary_recall = {:.6f}\nboundary_f = {:.6f}\n", bf.precision,
                     bf.recall, bf.fscore);
  return out;
}

}  // namespace jsenet
