#pragma once

#include <stdexcept>
#include <string>

namespace jsenet {

// Violated precondition or internal contract. The CLI maps these to exit code 1.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Operand shapes do not fit the op.
class DimensionError : public ContractError {
 public:
  explicit DimensionError(const std::string& what) : ContractError(what) {}
};

// mean_over_index_groups was handed an empty group.
class DegenerateGroupError : public ContractError {
 public:
  explicit DegenerateGroupError(const std::string& what) : ContractError(what) {}
};

// Malformed files, bad flags, unreadable paths. The CLI maps these to exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace jsenet
