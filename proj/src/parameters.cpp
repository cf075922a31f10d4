#include "jsenet/parameters.hpp"

#include <cstring>

namespace jsenet {

Tensor& ParameterStore::add(std::string name, Tensor tensor, bool trainable) {
  require(!index_.contains(name), "parameter store: duplicate name " + name);
  tensor.set_requires_grad(trainable);
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(tensor), trainable});
  return entries_.back().tensor;
}

bool ParameterStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

Tensor& ParameterStore::get(std::string_view name) {
  auto it = index_.find(name);
  require(it != index_.end(), "parameter store: no entry named " + std::string(name));
  return entries_[it->second].tensor;
}

const Tensor& ParameterStore::get(std::string_view name) const {
  auto it = index_.find(name);
  require(it != index_.end(), "parameter store: no entry named " + std::string(name));
  return entries_[it->second].tensor;
}

std::vector<Tensor> ParameterStore::parameters(std::string_view prefix) const {
  std::vector<Tensor> out;
  for (const Entry& e : entries_)
    if (e.trainable && has_prefix(e.name, prefix)) out.push_back(e.tensor);
  return out;
}

void ParameterStore::set_trainable_group(std::string_view prefix, bool requires_grad) {
  for (Entry& e : entries_)
    if (e.trainable && has_prefix(e.name, prefix)) e.tensor.set_requires_grad(requires_grad);
}

void ParameterStore::zero_grad() {
  for (Entry& e : entries_)
    if (e.trainable) e.tensor.zero_grad();
}

std::uint64_t ParameterStore::hash(std::string_view prefix) const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const Entry& e : entries_) {
    if (!has_prefix(e.name, prefix)) continue;
    mix(e.name.data(), e.name.size());
    auto values = e.tensor.data();
    mix(values.data(), values.size_bytes());
  }
  return h;
}

void ParameterStore::round_to_checkpoint_precision() {
  for (Entry& e : entries_)
    for (Real& v : e.tensor.data()) v = static_cast<Real>(static_cast<float>(v));
}

}  // namespace jsenet
