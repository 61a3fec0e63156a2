#ifndef CTA_BINARY_IO_HPP_
#define CTA_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "cta/errors.hpp"

// Little-endian scalar encoding shared by the checkpoint and dataset formats.

namespace cta::le {

template <typename T>
void write(std::ostream& os, T value) {
  static_assert(std::is_arithmetic_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

/// Returns false on a short read (end of stream).
template <typename T>
bool read(std::istream& is, T& value) {
  static_assert(std::is_arithmetic_v<T>);
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  std::memcpy(&value, bytes, sizeof(T));
  return true;
}

template <typename T>
T read_or_throw(std::istream& is, const std::string& what) {
  T value{};
  if (!read(is, value)) throw FormatError("truncated data in " + what);
  return value;
}

}  // namespace cta::le

#endif  // CTA_BINARY_IO_HPP_
