#include "jsenet/optimizer.hpp"

#include <cmath>

namespace jsenet {

MomentumOptimizer::MomentumOptimizer(std::vector<Tensor> parameters, Real learning_rate,
                                     Real momentum)
    : parameters_(std::move(parameters)), learning_rate_(learning_rate), momentum_(momentum) {
  velocities_.reserve(parameters_.size());
  for (const Tensor& p : parameters_) velocities_.emplace_back(p.size(), Real(0));
}

void MomentumOptimizer::update(std::size_t slot, std::span<const Real> grad) {
  Tensor& p = parameters_[slot];
  if (grad.size() != p.size()) {
    throw ContractError("optimizer: gradient of size " + std::to_string(grad.size()) +
                        " for parameter of shape " + shape_string(p.shape()));
  }
  auto values = p.data();
  auto& v = velocities_[slot];
  for (std::size_t i = 0; i < values.size(); ++i) {
    v[i] = momentum_ * v[i] - learning_rate_ * grad[i];
    values[i] += v[i];
  }
}

void MomentumOptimizer::step() {
  for (std::size_t i = 0; i < parameters_.size(); ++i) update(i, std::as_const(parameters_[i]).grad());
}

void MomentumOptimizer::step(std::span<const std::vector<Real>> grads) {
  require(grads.size() == parameters_.size(), "optimizer: expected " +
                                                  std::to_string(parameters_.size()) +
                                                  " gradients, got " + std::to_string(grads.size()));
  for (std::size_t i = 0; i < parameters_.size(); ++i) update(i, grads[i]);
}

void MomentumOptimizer::zero_grad() {
  for (Tensor& p : parameters_) p.zero_grad();
}

Real scheduled_learning_rate(Real initial, double epoch, double epochs_per_decade) {
  return static_cast<Real>(static_cast<double>(initial) * std::pow(10.0, -epoch / epochs_per_decade));
}

}  // namespace jsenet
