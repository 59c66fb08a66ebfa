// SPDX-License-Identifier: Apache-2.0
#include "smoe/common/hash.hpp"

#include <cstring>

namespace smoe {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::span<const double> values, std::uint64_t h) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(values.data()),
                                  values.size_bytes()),
                 h);
}

std::string to_hex(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

}  // namespace smoe
