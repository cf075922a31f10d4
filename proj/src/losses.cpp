#include "jsenet/losses.hpp"

#include <spdlog/spdlog.h>

namespace jsenet {

namespace {

std::size_t count_valid(std::span<const std::uint8_t> valid, std::size_t n) {
  if (valid.empty()) return n;
  require(valid.size() == n, "loss: validity mask length mismatch");
  std::size_t count = 0;
  for (std::uint8_t v : valid) count += v != 0;
  return count;
}

void check_same_shape(const char* name, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(name) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

void check_beta(const char* name, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw ContractError(std::string(name) + ": skew weight " + std::to_string(beta) + " outside [0,1]");
  }
}

// -(sum(pos * log p) + sum(neg * log(1 - p))) / count
Tensor weighted_cross_entropy(Tape& tape, const Tensor& probs, const Tensor& pos, const Tensor& neg,
                              std::size_t count) {
  const Tensor log_p = ops::log(tape, probs);
  const Tensor log_q = ops::log(tape, ops::affine(tape, probs, -1, 1));
  const Tensor total = ops::add(tape, ops::sum(tape, ops::mul(tape, pos, log_p)),
                                ops::sum(tape, ops::mul(tape, neg, log_q)));
  return ops::affine(tape, total, Real(-1) / static_cast<Real>(count), 0);
}

}  // namespace

Tensor loss_seg(Tape& tape, const OneHotMask& truth, const Tensor& probs) {
  check_same_shape("loss_seg", truth.values, probs);
  const std::size_t valid = truth.valid_count();
  if (valid == 0) {
    spdlog::warn("loss_seg: every point is ignored, loss is zero");
    return Tensor::scalar(0);
  }
  const Tensor picked = ops::mul(tape, truth.values, ops::log(tape, probs));
  return ops::affine(tape, ops::sum(tape, picked), Real(-1) / static_cast<Real>(valid), 0);
}

Tensor loss_edge(Tape& tape, const Tensor& truth, const Tensor& probs, std::span<const double> beta,
                 std::span<const std::uint8_t> valid) {
  check_same_shape("loss_edge", truth, probs);
  const std::size_t n = probs.rows(), k = probs.cols();
  require(beta.size() == k, "loss_edge: expected " + std::to_string(k) + " skew weights");
  for (double b : beta) check_beta("loss_edge", b);
  const std::size_t count = count_valid(valid, n);
  if (count == 0) return Tensor::scalar(0);
  Tensor pos = Tensor::zeros({n, k}), neg = Tensor::zeros({n, k});
  auto t = truth.data();
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid.empty() && !valid[i]) continue;
    for (std::size_t c = 0; c < k; ++c) {
      const Real e = t[i * k + c];
      pos.at(i, c) = static_cast<Real>(beta[c]) * e;
      neg.at(i, c) = static_cast<Real>(1.0 - beta[c]) * (1 - e);
    }
  }
  return weighted_cross_entropy(tape, probs, pos, neg, count);
}

Tensor loss_bce(Tape& tape, std::span<const std::uint8_t> truth, const Tensor& probs, double beta,
                std::span<const std::uint8_t> valid) {
  const std::size_t n = probs.rows();
  if (probs.cols() != 1 || truth.size() != n) {
    throw DimensionError("loss_bce: map of shape " + shape_string(probs.shape()) + " for " +
                         std::to_string(truth.size()) + " labels");
  }
  check_beta("loss_bce", beta);
  const std::size_t count = count_valid(valid, n);
  if (count == 0) return Tensor::scalar(0);
  Tensor pos = Tensor::zeros({n, 1}), neg = Tensor::zeros({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid.empty() && !valid[i]) continue;
    pos.at(i, 0) = truth[i] ? static_cast<Real>(beta) : Real(0);
    neg.at(i, 0) = truth[i] ? Real(0) : static_cast<Real>(1.0 - beta);
  }
  return weighted_cross_entropy(tape, probs, pos, neg, count);
}

Tensor loss_dual(Tape& tape, const Tensor& truth_act, const Tensor& act, double beta,
                 std::span<const std::uint8_t> valid) {
  check_same_shape("loss_dual", truth_act, act);
  check_beta("loss_dual", beta);
  const std::size_t n = act.rows(), k = act.cols();
  const std::size_t count = count_valid(valid, n);
  if (count == 0) return Tensor::scalar(0);
  Tensor diff = ops::abs(tape, ops::sub(tape, act, truth_act));
  if (!valid.empty()) {
    Tensor keep = Tensor::zeros({n, k});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < k; ++c) keep.at(i, c) = valid[i] ? Real(1) : Real(0);
    diff = ops::mul(tape, diff, keep);
  }
  return ops::affine(tape, ops::sum(tape, diff), static_cast<Real>(beta) / static_cast<Real>(count), 0);
}

Tensor edge_truth_matrix(const SemanticEdgeLabels& labels) {
  const std::size_t n = labels.size(), k = static_cast<std::size_t>(labels.num_classes);
  Tensor out = Tensor::zeros({n, k});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) out.at(i, c) = labels.has(i, static_cast<int>(c)) ? Real(1) : Real(0);
  return out;
}

Tensor loss_total(Tape& tape, const LossComponents& components, const LossWeights& weights) {
  Tensor total = Tensor::scalar(0);
  auto accumulate = [&](const Tensor& term, Real weight, const char* name) {
    if (!term.defined()) return;
    require(term.size() == 1, std::string("loss_total: ") + name + " term is not a scalar");
    if (!(term.item() >= 0)) {
      throw ContractError(std::string("loss_total: ") + name + " term is negative (" +
                          std::to_string(term.item()) + ")");
    }
    total = ops::add(tape, total, ops::affine(tape, term, weight, 0));
  };
  for (const Tensor& t : components.seg) accumulate(t, weights.seg, "seg");
  accumulate(components.edge, weights.edge, "edge");
  for (const Tensor& t : components.bce) accumulate(t, weights.bce, "bce");
  for (const Tensor& t : components.dual) accumulate(t, weights.dual, "dual");
  return total;
}

}  // namespace jsenet
