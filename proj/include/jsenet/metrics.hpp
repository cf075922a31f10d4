#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jsenet/labels.hpp"

namespace jsenet {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  // Rows are ground truth, columns predictions. gt == -1 is counted as ignored.
  void add(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt);
  void merge(const ConfusionMatrix& other);

  int num_classes() const { return k_; }
  std::uint64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt * k_ + pred)]; }
  std::uint64_t ignored() const { return ignored_; }
  std::uint64_t total() const;

 private:
  int k_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t ignored_ = 0;
};

struct IouReport {
  std::vector<double> per_class;       // NaN for classes absent from both pred and gt
  std::vector<std::uint8_t> present;
  double mean = 0.0;
};

IouReport miou(const ConfusionMatrix& matrix);
IouReport miou(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt, int num_classes);

inline constexpr int kThresholdCount = 99;  // t_j = j / 100, j = 1..99

inline double sweep_threshold(int j) { return (j + 1) / 100.0; }

// Dataset-wide per-class, per-threshold counts; a score counts as positive
// at threshold t when score >= t.
class ThresholdSweep {
 public:
  explicit ThresholdSweep(int num_classes);

  // scores: N x K point-major, gt: per-point edge bitmasks.
  void add(std::span<const double> scores, const SemanticEdgeLabels& gt);
  void merge(const ThresholdSweep& other);

  int num_classes() const { return k_; }
  std::uint64_t tp(int k, int j) const { return tp_[index(k, j)]; }
  std::uint64_t fp(int k, int j) const { return fp_[index(k, j)]; }
  std::uint64_t fn(int k, int j) const { return fn_[index(k, j)]; }
  std::uint64_t positives(int k) const { return positives_[static_cast<std::size_t>(k)]; }

 private:
  std::size_t index(int k, int j) const { return static_cast<std::size_t>(k * kThresholdCount + j); }
  int k_;
  std::vector<std::uint64_t> tp_, fp_, fn_, positives_;
};

struct MfReport {
  std::vector<double> per_class;       // NaN for classes without ground-truth edges
  std::vector<double> best_threshold;
  std::vector<std::uint8_t> counted;
  double mean = 0.0;
};

MfReport mf_ods(const ThresholdSweep& sweep);

inline double f_measure(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  if (tp == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2 * p * r / (p + r);
}

struct BoundaryScore {
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
};

// Boundaries of both labelings by the edge-label rule at `radius`, compared point-wise.
BoundaryScore boundary_fscore(std::span<const Vec3> positions, std::span<const std::int32_t> pred,
                              std::span<const std::int32_t> gt, int num_classes,
                              double radius = kDefaultEdgeRadius);

// Report lines: "name = value" with 4 decimals, values in percent.
std::string format_key_values(const std::vector<std::pair<std::string, double>>& entries);
std::string format_table(const std::vector<std::string>& class_names, const std::vector<double>& values,
                         const std::string& title, double mean);

}  // namespace jsenet
