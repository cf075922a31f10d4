#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "jsenet/tensor.hpp"

namespace jsenet {

// Named tensors owned by a model. Trainable entries are parameters; the rest
// are buffers (batch-norm running statistics). Names are '/'-separated and
// the first segment is the group ("theta", "phi", "gamma").
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool trainable = true;
  };

  Tensor& add(std::string name, Tensor tensor, bool trainable = true);
  bool contains(std::string_view name) const;
  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  // Trainable tensors whose name starts with `prefix` (all when empty).
  std::vector<Tensor> parameters(std::string_view prefix = {}) const;
  void set_trainable_group(std::string_view prefix, bool requires_grad);
  void zero_grad();

  // FNV-1a over names and values of every entry under `prefix`.
  std::uint64_t hash(std::string_view prefix = {}) const;

  // Rounds every value to the nearest 32-bit float, i.e. what a checkpoint
  // round trip would store.
  void round_to_checkpoint_precision();

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

inline bool has_prefix(std::string_view name, std::string_view prefix) {
  return name.substr(0, prefix.size()) == prefix;
}

}  // namespace jsenet
