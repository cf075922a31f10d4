#pragma once

#include <span>
#include <vector>

#include "jsenet/tensor.hpp"

namespace jsenet {

// Heavy-ball SGD: v <- momentum * v - lr * g; p <- p + v.
class MomentumOptimizer {
 public:
  MomentumOptimizer(std::vector<Tensor> parameters, Real learning_rate = Real(0.01),
                    Real momentum = Real(0.98));

  // Applies one update using each parameter's accumulated gradient.
  void step();
  // Same update with explicitly supplied gradients, one per parameter.
  void step(std::span<const std::vector<Real>> grads);
  void zero_grad();

  Real learning_rate() const { return learning_rate_; }
  void set_learning_rate(Real lr) { learning_rate_ = lr; }
  Real momentum() const { return momentum_; }
  const std::vector<Tensor>& parameters() const { return parameters_; }
  const std::vector<std::vector<Real>>& velocities() const { return velocities_; }

 private:
  void update(std::size_t slot, std::span<const Real> grad);

  std::vector<Tensor> parameters_;
  std::vector<std::vector<Real>> velocities_;
  Real learning_rate_;
  Real momentum_;
};

// Learning rate at `epoch`: divided by 10 every 100 epochs, applied as a
// smooth exponential decay.
Real scheduled_learning_rate(Real initial, double epoch, double epochs_per_decade = 100.0);

}  // namespace jsenet
