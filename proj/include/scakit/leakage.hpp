/*
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * This file is part of scakit, a side-channel analysis toolkit.
 */

// Hamming-weight / Hamming-distance leakage model primitives.

#pragma once

#include <bit>
#include <cstdint>

#include "scakit/errors.hpp"

namespace scakit {

/// Leakage models: HW of the written value, or HD between the previous and
/// the new content of the register.
enum class LeakModel { HW, HD };

inline const char *to_string(LeakModel m) { return m == LeakModel::HW ? "hw" : "hd"; }

namespace detail {
inline std::uint32_t width_mask(int width) {
    switch (width) {
    case 8: return 0xFFu;
    case 16: return 0xFFFFu;
    case 32: return 0xFFFFFFFFu;
    default: throw UsageError("hamming width must be 8, 16 or 32");
    }
}
} // namespace detail

/// Number of set bits among the low `width` bits.
inline int hamming_weight(std::uint32_t bits, int width) {
    return std::popcount(bits & detail::width_mask(width));
}

/// Number of bit flips between x and y over the low `width` bits.
inline int hamming_distance(std::uint32_t x, std::uint32_t y, int width) {
    return std::popcount((x ^ y) & detail::width_mask(width));
}

// Width-checked variants are the public contract; the attack's inner loops
// use these unchecked forms on pre-validated widths.
inline int hw16(std::uint32_t v) { return std::popcount(v & 0xFFFFu); }
inline int hw32(std::uint32_t v) { return std::popcount(v); }
inline int hd16(std::uint32_t a, std::uint32_t b) { return std::popcount((a ^ b) & 0xFFFFu); }
inline int hd32(std::uint32_t a, std::uint32_t b) { return std::popcount(a ^ b); }

} // namespace scakit
