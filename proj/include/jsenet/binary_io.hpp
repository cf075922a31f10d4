#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "jsenet/errors.hpp"

namespace jsenet::binary {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw InputError(std::string("truncated file while reading ") + what);
  }
  return value;
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const char* format) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw InputError(std::string("not a ") + format + " file (bad magic)");
  }
}

}  // namespace jsenet::binary
