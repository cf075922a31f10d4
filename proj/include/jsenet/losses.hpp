#pragma once

// Supervision terms. Every loss is a per-point mean over the valid (non-ignore)
// points so magnitudes do not depend on sphere density.

#include <span>
#include <vector>

#include "jsenet/labels.hpp"
#include "jsenet/tensor.hpp"

namespace jsenet {

struct LossWeights {
  Real seg = 1;   // lambda_0, set to the class count by for_classes()
  Real edge = 1;  // lambda_1
  Real bce = 1;   // lambda_2
  Real dual = 1;  // lambda_3

  static LossWeights for_classes(int num_classes) { return {Real(num_classes), 1, 1, 1}; }
};

// Cross-entropy between one-hot truth and probability rows `probs` (N x K).
Tensor loss_seg(Tape& tape, const OneHotMask& truth, const Tensor& probs);

// Weighted multi-label loss. `truth` is N x K in {0,1}, `probs` N x K
// post-sigmoid, beta_k per class. `valid` (optional) masks points out.
Tensor loss_edge(Tape& tape, const Tensor& truth, const Tensor& probs, std::span<const double> beta,
                 std::span<const std::uint8_t> valid = {});

// Weighted binary cross-entropy on an N x 1 map.
Tensor loss_bce(Tape& tape, std::span<const std::uint8_t> truth, const Tensor& probs, double beta,
                std::span<const std::uint8_t> valid = {});

// beta-weighted L1 between ground-truth and predicted edge activations.
Tensor loss_dual(Tape& tape, const Tensor& truth_act, const Tensor& act, double beta,
                 std::span<const std::uint8_t> valid = {});

// N x K {0,1} matrix of per-class edge membership.
Tensor edge_truth_matrix(const SemanticEdgeLabels& labels);

struct LossComponents {
  std::vector<Tensor> seg;   // every segmentation-mask term
  Tensor edge;               // multi-label term (may be undefined)
  std::vector<Tensor> bce;   // binary head terms
  std::vector<Tensor> dual;  // activation terms
};

Tensor loss_total(Tape& tape, const LossComponents& components, const LossWeights& weights);

}  // namespace jsenet
