#include "jsenet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <spdlog/spdlog.h>

namespace jsenet {

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
  require(num_classes >= 1, "confusion matrix: need at least one class");
  counts_.assign(static_cast<std::size_t>(k_ * k_), 0);
}

void ConfusionMatrix::add(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt) {
  require(pred.size() == gt.size(), "confusion matrix: prediction and ground truth lengths differ");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == kIgnoreLabel) {
      ++ignored_;
      continue;
    }
    require(gt[i] >= 0 && gt[i] < k_, "confusion matrix: ground-truth label out of range");
    require(pred[i] >= 0 && pred[i] < k_, "confusion matrix: predicted label out of range");
    ++counts_[static_cast<std::size_t>(gt[i] * k_ + pred[i])];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  require(other.k_ == k_, "confusion matrix: class counts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  ignored_ += other.ignored_;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

IouReport miou(const ConfusionMatrix& m) {
  require(m.total() > 0, "miou: no valid points");
  const int k = m.num_classes();
  IouReport r;
  r.per_class.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::quiet_NaN());
  r.present.assign(static_cast<std::size_t>(k), 0);
  double sum = 0;
  int counted = 0;
  for (int c = 0; c < k; ++c) {
    std::uint64_t tp = m.at(c, c), fp = 0, fn = 0;
    for (int o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += m.at(o, c);
      fn += m.at(c, o);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    r.present[static_cast<std::size_t>(c)] = 1;
    r.per_class[static_cast<std::size_t>(c)] = static_cast<double>(tp) / static_cast<double>(denom);
    sum += r.per_class[static_cast<std::size_t>(c)];
    ++counted;
  }
  r.mean = sum / counted;
  return r;
}

IouReport miou(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt, int num_classes) {
  ConfusionMatrix m(num_classes);
  m.add(pred, gt);
  return miou(m);
}

ThresholdSweep::ThresholdSweep(int num_classes) : k_(num_classes) {
  require(num_classes >= 1 && num_classes <= kMaxClasses, "threshold sweep: class count must be in [1, 64]");
  const auto n = static_cast<std::size_t>(k_ * kThresholdCount);
  tp_.assign(n, 0);
  fp_.assign(n, 0);
  fn_.assign(n, 0);
  positives_.assign(static_cast<std::size_t>(k_), 0);
}

void ThresholdSweep::add(std::span<const double> scores, const SemanticEdgeLabels& gt) {
  const std::size_t n = gt.size(), k = static_cast<std::size_t>(k_);
  require(gt.num_classes == k_, "threshold sweep: edge labels have a different class count");
  require(scores.size() == n * k, "threshold sweep: score matrix does not match the edge labels");
  std::vector<double> pos, neg;
  for (int c = 0; c < k_; ++c) {
    pos.clear();
    neg.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const double s = scores[i * k + static_cast<std::size_t>(c)];
      require(std::isfinite(s), "threshold sweep: non-finite score");
      (gt.has(i, c) ? pos : neg).push_back(s);
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    positives_[static_cast<std::size_t>(c)] += pos.size();
    for (int j = 0; j < kThresholdCount; ++j) {
      const double t = sweep_threshold(j);
      const auto tp = static_cast<std::uint64_t>(pos.end() - std::lower_bound(pos.begin(), pos.end(), t));
      const auto fp = static_cast<std::uint64_t>(neg.end() - std::lower_bound(neg.begin(), neg.end(), t));
      tp_[index(c, j)] += tp;
      fp_[index(c, j)] += fp;
      fn_[index(c, j)] += pos.size() - tp;
    }
  }
}

void ThresholdSweep::merge(const ThresholdSweep& other) {
  require(other.k_ == k_, "threshold sweep: class counts differ");
  for (std::size_t i = 0; i < tp_.size(); ++i) {
    tp_[i] += other.tp_[i];
    fp_[i] += other.fp_[i];
    fn_[i] += other.fn_[i];
  }
  for (std::size_t c = 0; c < positives_.size(); ++c) positives_[c] += other.positives_[c];
}

MfReport mf_ods(const ThresholdSweep& sweep) {
  const int k = sweep.num_classes();
  MfReport r;
  r.per_class.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::quiet_NaN());
  r.best_threshold.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::quiet_NaN());
  r.counted.assign(static_cast<std::size_t>(k), 0);
  double sum = 0;
  int counted = 0;
  for (int c = 0; c < k; ++c) {
    if (sweep.positives(c) == 0) {
      spdlog::info("mf_ods: class {} has no ground-truth edge points, excluded from the mean", c);
      continue;
    }
    double best = -1;
    int best_j = 0;
    for (int j = 0; j < kThresholdCount; ++j) {
      const double f = f_measure(sweep.tp(c, j), sweep.fp(c, j), sweep.fn(c, j));
      if (f > best) {
        best = f;
        best_j = j;
      }
    }
    r.per_class[static_cast<std::size_t>(c)] = best;
    r.best_threshold[static_cast<std::size_t>(c)] = sweep_threshold(best_j);
    r.counted[static_cast<std::size_t>(c)] = 1;
    sum += best;
    ++counted;
  }
  r.mean = counted > 0 ? sum / counted : 0.0;
  return r;
}

BoundaryScore boundary_fscore(std::span<const Vec3> positions, std::span<const std::int32_t> pred,
                              std::span<const std::int32_t> gt, int num_classes, double radius) {
  require(pred.size() == positions.size() && gt.size() == positions.size(),
          "boundary_fscore: label arrays do not match the positions");
  const auto gt_edges = to_binary_edges(generate_edge_labels(positions, gt, num_classes, radius));
  const auto pred_edges = to_binary_edges(generate_edge_labels(positions, pred, num_classes, radius));
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (gt[i] == kIgnoreLabel) continue;
    tp += pred_edges[i] && gt_edges[i];
    fp += pred_edges[i] && !gt_edges[i];
    fn += !pred_edges[i] && gt_edges[i];
  }
  require(tp + fn > 0, "boundary_fscore: ground truth has no boundary points");
  BoundaryScore s;
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  s.fscore = f_measure(tp, fp, fn);
  return s;
}

std::string format_key_values(const std::vector<std::pair<std::string, double>>& entries) {
  std::string out;
  for (const auto& [key, value] : entries) {
    if (std::isnan(value))
      out += fmt::format("{} = nan\n", key);
    else
      out += fmt::format("{} = {:.4f}\n", key, 100.0 * value);
  }
  return out;
}

std::string format_table(const std::vector<std::string>& class_names, const std::vector<double>& values,
                         const std::string& title, double mean) {
  std::size_t width = 5;
  for (const auto& n : class_names) width = std::max(width, n.size());
  std::string out = fmt::format("{:<{}}  {:>8}\n", "class", width, title);
  for (std::size_t c = 0; c < values.size(); ++c) {
    const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
    if (std::isnan(values[c]))
      out += fmt::format("{:<{}}  {:>8}\n", name, width, "-");
    else
      out += fmt::format("{:<{}}  {:>8.2f}\n", name, width, 100.0 * values[c]);
  }
  out += fmt::format("{:<{}}  {:>8.2f}\n", "mean", width, 100.0 * mean);
  return out;
}

}  // namespace jsenet
