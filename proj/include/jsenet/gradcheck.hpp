#pragma once

// Central finite-difference checks of the tape gradients.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jsenet/tensor.hpp"

namespace jsenet {

struct GradCheckResult {
  std::string name;
  double max_relative_error = 0.0;  // worst input, ||analytic - numeric|| / max(norms)
  std::size_t evaluations = 0;
  bool passed = false;
};

// `loss` builds a scalar from `inputs` on the given tape. Every input is
// perturbed entry by entry with step `eps`.
GradCheckResult check_gradient(const std::string& name, std::vector<Tensor> inputs,
                               const std::function<Tensor(Tape&)>& loss, double eps, double tolerance);

// Losses, the edge-map operator, one KPConv layer and the tensor ops on random
// instances of at most 50 points.
std::vector<GradCheckResult> run_gradient_suites(std::uint64_t seed, double tolerance = 1e-4);

}  // namespace jsenet
