#include "jsenet/gradcheck.hpp"

#include <cmath>
#include <random>

#include "jsenet/edgegen.hpp"
#include "jsenet/kpconv.hpp"
#include "jsenet/losses.hpp"
#include "jsenet/spatial_index.hpp"

namespace jsenet {

GradCheckResult check_gradient(const std::string& name, std::vector<Tensor> inputs,
                               const std::function<Tensor(Tape&)>& loss, double eps, double tolerance) {
  GradCheckResult result;
  result.name = name;
  for (Tensor& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tape tape;
  const Tensor value = loss(tape);
  require(value.size() == 1, "gradcheck: loss of " + name + " is not a scalar");
  tape.backward(value);
  ++result.evaluations;

  auto evaluate = [&] {
    Tape scratch;
    const double v = loss(scratch).item();
    ++result.evaluations;
    return v;
  };
  for (Tensor& t : inputs) {
    const std::vector<Real> analytic(t.grad().begin(), t.grad().end());
    auto data = t.data();
    double diff2 = 0, a2 = 0, n2 = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Real saved = data[i];
      data[i] = saved + static_cast<Real>(eps);
      const double plus = evaluate();
      data[i] = saved - static_cast<Real>(eps);
      const double minus = evaluate();
      data[i] = saved;
      const double numeric = (plus - minus) / (2 * eps);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += static_cast<double>(analytic[i]) * analytic[i];
      n2 += numeric * numeric;
    }
    const double scale = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    result.max_relative_error = std::max(result.max_relative_error, std::sqrt(diff2) / scale);
  }
  result.passed = result.max_relative_error < tolerance;
  return result;
}

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t = Tensor::zeros(std::move(shape));
  for (Real& v : t.data()) v = static_cast<Real>(d(rng));
  return t;
}

std::vector<Vec3> random_points(std::size_t n, double extent, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, extent);
  std::vector<Vec3> out(n);
  for (Vec3& p : out) p = Vec3(d(rng), d(rng), d(rng));
  return out;
}

// Weighted sum so that every output entry gets a distinct upstream gradient.
Tensor project(Tape& tape, const Tensor& x, const Tensor& weights) { return ops::sum(tape, ops::mul(tape, x, weights)); }

}  // namespace

std::vector<GradCheckResult> run_gradient_suites(std::uint64_t seed, double tolerance) {
  const double eps = sizeof(Real) == 8 ? 1e-6 : 1e-2;
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> results;
  const std::size_t n = 30, k = 4;

  std::vector<std::int32_t> labels(n);
  std::uniform_int_distribution<int> label_dist(-1, static_cast<int>(k) - 1);
  for (auto& l : labels) l = label_dist(rng);
  labels[0] = 0;
  const OneHotMask truth = one_hot(labels, static_cast<int>(k));
  std::vector<std::uint8_t> valid(n);
  for (std::size_t i = 0; i < n; ++i) valid[i] = labels[i] != kIgnoreLabel;

  {
    Tensor logits = random_tensor({n, k}, rng, -2, 2);
    results.push_back(check_gradient("loss_seg", {logits}, [&](Tape& t) {
      return loss_seg(t, truth, ops::softmax_rows(t, logits));
    }, eps, tolerance));
  }
  {
    Tensor logits = random_tensor({n, k}, rng, -2, 2);
    Tensor edge_truth = Tensor::zeros({n, k});
    std::bernoulli_distribution coin(0.3);
    for (Real& v : edge_truth.data()) v = coin(rng) ? 1 : 0;
    std::vector<double> beta(k);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    for (double& b : beta) b = unit(rng);
    results.push_back(check_gradient("loss_edge", {logits}, [&](Tape& t) {
      return loss_edge(t, edge_truth, ops::sigmoid(t, logits), beta, valid);
    }, eps, tolerance));

    std::vector<std::uint8_t> binary(n);
    for (auto& b : binary) b = coin(rng);
    Tensor single = random_tensor({n, 1}, rng, -2, 2);
    const double b0 = unit(rng);
    results.push_back(check_gradient("loss_bce", {single}, [&](Tape& t) {
      return loss_bce(t, binary, ops::sigmoid(t, single), b0, valid);
    }, eps, tolerance));

    Tensor act = random_tensor({n, k}, rng, 0, 1);
    const Tensor act_truth = random_tensor({n, k}, rng, 0, 1);
    results.push_back(check_gradient("loss_dual", {act}, [&](Tape& t) {
      return loss_dual(t, act_truth, act, b0, valid);
    }, eps, tolerance));
  }
  {
    const std::vector<Vec3> pts = random_points(40, 0.3, rng);
    const MeanFilter filter = build_mean_filter(pts, 0.1);
    Tensor logits = random_tensor({40, k}, rng, -2, 2);
    const Tensor w = random_tensor({40, k}, rng, -1, 1);
    results.push_back(check_gradient("emg", {logits}, [&](Tape& t) {
      return project(t, emg(t, ops::softmax_rows(t, logits), filter), w);
    }, eps, tolerance));
  }
  {
    const std::vector<Vec3> supports = random_points(20, 0.2, rng);
    const std::vector<Vec3> queries = random_points(12, 0.2, rng);
    const double radius = 0.1;
    const KernelInfluence inf = build_influence(queries, supports, radius_neighbors(supports, queries, radius), radius);
    Tensor features = random_tensor({20, 3}, rng, -1, 1);
    Tensor weights = random_tensor({kKernelPoints, 3, 5}, rng, -1, 1);
    const Tensor w = random_tensor({12, 5}, rng, -1, 1);
    results.push_back(check_gradient("kpconv", {features, weights}, [&](Tape& t) {
      return project(t, kpconv(t, features, weights, inf), w);
    }, eps, tolerance));
  }
  {
    Tensor x = random_tensor({20, 3}, rng, -1, 1);
    Tensor gamma = random_tensor({1, 3}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({1, 3}, rng, -0.5, 0.5);
    Tensor rm = Tensor::zeros({1, 3}), rv = Tensor::full({1, 3}, 1);
    const Tensor w = random_tensor({20, 3}, rng, -1, 1);
    results.push_back(check_gradient("batch_norm", {x, gamma, beta}, [&](Tape& t) {
      return project(t, ops::batch_norm(t, x, gamma, beta, rm, rv, {}), w);
    }, eps, tolerance));
  }
  {
    Tensor a = random_tensor({10, 4}, rng, -1, 1);
    Tensor b = random_tensor({4, 6}, rng, -1, 1);
    Tensor bias = random_tensor({1, 6}, rng, -1, 1);
    IndexGroups groups;
    std::uniform_int_distribution<std::uint32_t> row(0, 9);
    for (int g = 0; g < 7; ++g) {
      std::vector<std::uint32_t> members{row(rng), row(rng), row(rng)};
      groups.push_group(members);
    }
    const std::vector<std::uint32_t> gather{3, 1, 4, 1, 5, 9, 2, 6};
    const Tensor w = random_tensor({8, 10}, rng, -1, 1);
    results.push_back(check_gradient("tensor_ops", {a, b, bias}, [&](Tape& t) {
      Tensor h = ops::leaky_relu(t, ops::add(t, ops::matmul(t, a, b), bias));
      Tensor pooled = ops::mean_over_index_groups(t, h, groups);
      Tensor scattered = ops::scatter_add_rows(t, pooled, std::vector<std::uint32_t>{0, 2, 2, 5, 7, 1, 3}, 10);
      Tensor both = ops::concat(t, {ops::slice_column(t, h, 1, 5), ops::affine(t, ops::sigmoid(t, scattered), 2, -1)});
      Tensor picked = ops::gather_rows(t, both, gather);
      return ops::mean(t, ops::mul(t, ops::clamp(t, picked, -0.9, 0.9), w));
    }, eps, tolerance));
  }
  return results;
}

}  // namespace jsenet
