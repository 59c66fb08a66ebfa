// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace smoe {

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::span<const double> values, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Fixed-width lowercase hex (16 chars).
std::string to_hex(std::uint64_t value);

inline std::string hex_digest(std::string_view bytes) { return to_hex(fnv1a64(bytes)); }

}  // namespace smoe
