#include "jsenet/voting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "jsenet/spatial_index.hpp"

namespace jsenet {

VoteAccumulator::VoteAccumulator(std::size_t points, std::size_t width) : points_(points), width_(width) {
  require(width > 0, "vote accumulator: zero width");
}

void VoteAccumulator::add(std::uint64_t key, std::vector<std::uint32_t> rows, std::vector<double> values) {
  require(values.size() == rows.size() * width_, "vote accumulator: value block does not match its rows");
  for (std::uint32_t r : rows) require(r < points_, "vote accumulator: row out of range");
  for (const Block& b : blocks_) require(b.key != key, "vote accumulator: duplicate block key");
  blocks_.push_back({key, std::move(rows), std::move(values)});
}

std::vector<std::uint32_t> VoteAccumulator::counts() const {
  std::vector<std::uint32_t> c(points_, 0);
  for (const Block& b : blocks_)
    for (std::uint32_t r : b.rows) ++c[r];
  return c;
}

std::vector<double> VoteAccumulator::finalize() const {
  std::vector<const Block*> order;
  for (const Block& b : blocks_) order.push_back(&b);
  std::sort(order.begin(), order.end(), [](const Block* a, const Block* b) { return a->key < b->key; });
  std::vector<double> sums(points_ * width_, 0.0);
  std::vector<std::uint32_t> count(points_, 0);
  for (const Block* b : order) {
    for (std::size_t i = 0; i < b->rows.size(); ++i) {
      const std::uint32_t r = b->rows[i];
      ++count[r];
      for (std::size_t c = 0; c < width_; ++c) sums[r * width_ + c] += b->values[i * width_ + c];
    }
  }
  for (std::size_t p = 0; p < points_; ++p) {
    if (count[p] == 0) throw ContractError("vote accumulator: point " + std::to_string(p) + " was never predicted");
    for (std::size_t c = 0; c < width_; ++c) sums[p * width_ + c] /= count[p];
  }
  return sums;
}

std::vector<Vec3> sphere_centers(const PointCloud& cloud, double radius, double spacing) {
  require(radius > 0 && spacing > 0, "sphere grid: radius and spacing must be positive");
  require(!cloud.empty(), "sphere grid: empty cloud");
  Vec3 lo = cloud.positions[0], hi = lo;
  for (const Vec3& p : cloud.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const SpatialIndex index(cloud.positions, radius);
  std::vector<std::uint8_t> covered(cloud.size(), 0);
  std::vector<Vec3> centers;
  std::vector<std::uint32_t> hits;
  auto cover = [&](const Vec3& c) {
    index.radius_query(c, radius, hits);
    if (hits.empty()) return;
    centers.push_back(c);
    for (std::uint32_t h : hits) covered[h] = 1;
  };
  // Nodes centered on the box, at most spacing / 2 from any point along each axis.
  const Eigen::Vector3i nodes = ((hi - lo) / spacing).array().floor().cast<int>() + 1;
  const Vec3 start = 0.5 * (lo + hi) - 0.5 * spacing * (nodes - Eigen::Vector3i::Ones()).cast<double>();
  for (int i = 0; i < nodes.x(); ++i)
    for (int j = 0; j < nodes.y(); ++j)
      for (int k = 0; k < nodes.z(); ++k) cover(start + spacing * Vec3(i, j, k));
  for (std::size_t p = 0; p < cloud.size(); ++p)
    if (!covered[p]) cover(cloud.positions[p]);
  return centers;
}

std::vector<std::int32_t> argmax_rows(std::span<const double> values, std::size_t width) {
  require(width > 0 && values.size() % width == 0, "argmax: bad matrix");
  std::vector<std::int32_t> out(values.size() / width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = values.subspan(i * width, width);
    out[i] = static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

ScenePrediction predict_grid(const JSENet& model, const PreparedScene& scene, const VotingOptions& options) {
  require(model.phase() == Phase::kInference, "voting: model must be in inference mode");
  const double spacing = options.spacing > 0 ? options.spacing : options.sphere_radius;
  const std::vector<Vec3> centers = sphere_centers(scene.cloud, options.sphere_radius, spacing);
  std::vector<std::size_t> order(centers.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (options.shuffle_seed) {
    std::mt19937_64 rng(*options.shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  const ModelConfig& mc = model.config();
  const auto k = static_cast<std::size_t>(mc.num_classes);
  TrainConfig sampling;
  sampling.sphere_radius = options.sphere_radius;
  VoteAccumulator acc(scene.cloud.size(), 2 * k);
  std::mutex lock;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;

  auto worker = [&] {
    try {
      for (std::size_t i; (i = next.fetch_add(1)) < order.size();) {
        const std::size_t sphere_id = order[i];
        const Sphere sphere = make_sphere(scene, centers[sphere_id], sampling, mc, 0, false);
        Tape tape;
        const JSENetOutputs out = model.forward(tape, sphere.input);
        const std::size_t n = sphere.cloud.size();
        std::vector<double> values(n * 2 * k);
        auto prob = out.prob_refined.data();
        auto edge = out.sep_refined.data();
        for (std::size_t p = 0; p < n; ++p)
          for (std::size_t c = 0; c < k; ++c) {
            values[p * 2 * k + c] = prob[p * k + c];
            values[p * 2 * k + k + c] = edge[p * k + c];
          }
        std::lock_guard<std::mutex> guard(lock);
        acc.add(sphere_id, sphere.cloud.source_indices, std::move(values));
      }
    } catch (...) {
      std::lock_guard<std::mutex> guard(lock);
      if (!failure) failure = std::current_exception();
      next = order.size();
    }
  };
  const std::size_t threads = std::min(options.threads > 0 ? options.threads : worker_count(), order.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const std::vector<double> votes = acc.finalize();
  ScenePrediction pred;
  pred.num_classes = k;
  pred.spheres = centers.size();
  pred.probabilities.resize(scene.cloud.size() * k);
  pred.edges.resize(scene.cloud.size() * k);
  for (std::size_t p = 0; p < scene.cloud.size(); ++p)
    for (std::size_t c = 0; c < k; ++c) {
      pred.probabilities[p * k + c] = votes[p * 2 * k + c];
      pred.edges[p * k + c] = votes[p * 2 * k + k + c];
    }
  pred.labels = argmax_rows(pred.probabilities, k);
  return pred;
}

ScenePrediction infer_voting(const JSENet& model, const PreparedScene& scene, const VotingOptions& options) {
  const ScenePrediction grid = predict_grid(model, scene, options);
  ScenePrediction out;
  out.num_classes = grid.num_classes;
  out.spheres = grid.spheres;
  const auto k = grid.num_classes;
  out.probabilities = project_nearest<double>(scene.cloud.positions, scene.raw.positions, grid.probabilities, k);
  out.edges = project_nearest<double>(scene.cloud.positions, scene.raw.positions, grid.edges, k);
  out.labels = argmax_rows(out.probabilities, k);
  return out;
}

}  // namespace jsenet
