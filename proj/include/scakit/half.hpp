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

// Bit-exact IEEE 754 binary16 arithmetic.
//
// Half-precision layout: 1 sign bit, 5 exponent bits (bias 15), 10 mantissa
// bits. Everything here works on the raw 16-bit pattern; all rounding is
// round-to-nearest-even with full subnormal support and no flush-to-zero.
// fma() performs a true fused multiply-add: the product and sum are formed
// exactly in 128-bit integer arithmetic and rounded once.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cmath>
#include <limits>

namespace scakit::fp16 {

using half_t = std::uint16_t;

inline constexpr half_t kSignMask = 0x8000;
inline constexpr half_t kExpMask = 0x7C00;
inline constexpr half_t kMantMask = 0x03FF;
inline constexpr half_t kPosInf = 0x7C00;
inline constexpr half_t kNegInf = 0xFC00;
inline constexpr half_t kCanonicalNan = 0x7E00;
inline constexpr half_t kOne = 0x3C00;

constexpr bool sign_bit(half_t h) { return (h & kSignMask) != 0; }
constexpr bool is_nan(half_t h) { return (h & 0x7FFF) > 0x7C00; }
constexpr bool is_inf(half_t h) { return (h & 0x7FFF) == 0x7C00; }
constexpr bool is_finite(half_t h) { return (h & kExpMask) != kExpMask; }
constexpr bool is_zero(half_t h) { return (h & 0x7FFF) == 0; }
constexpr bool is_subnormal(half_t h) {
    return (h & kExpMask) == 0 && (h & kMantMask) != 0;
}

/// Exact value of a finite binary16 pattern (double covers binary16 exactly).
/// Infinities and NaNs map to the corresponding double specials.
inline double decode(half_t h) {
    const int e = (h >> 10) & 0x1F;
    const std::uint32_t m = h & kMantMask;
    double v;
    if (e == 0) {
        v = std::ldexp(static_cast<double>(m), -24);
    } else if (e == 31) {
        v = (m == 0) ? std::numeric_limits<double>::infinity()
                     : std::numeric_limits<double>::quiet_NaN();
    } else {
        v = std::ldexp(static_cast<double>(m | 0x400u), e - 25);
    }
    return sign_bit(h) ? -v : v;
}

namespace detail {

/// Exact decode of all 2^16 patterns; the fused-multiply-add hot path reads
/// operands from here (doubles cover binary16 exactly).
inline const double *decode_table() {
    static const auto table = [] {
        auto t = new std::array<double, 65536>;
        for (std::uint32_t p = 0; p < 65536; ++p) {
            const auto h = static_cast<half_t>(p);
            const int e = (h >> 10) & 0x1F;
            const std::uint32_t m = h & kMantMask;
            double v;
            if (e == 0)
                v = std::ldexp(static_cast<double>(m), -24);
            else if (e == 31)
                v = (m == 0) ? std::numeric_limits<double>::infinity()
                             : std::numeric_limits<double>::quiet_NaN();
            else
                v = std::ldexp(static_cast<double>(m | 0x400u), e - 25);
            (*t)[p] = sign_bit(h) ? -v : v;
        }
        return t;
    }();
    return table->data();
}

} // namespace detail

/// Nearest binary16 to a double under round-to-nearest-even. Overflow
/// saturates to +/-infinity, NaN becomes the canonical quiet NaN pattern,
/// signed zeros are preserved.
inline half_t encode(double x) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
    const auto sign = static_cast<half_t>((bits >> 48) & kSignMask);
    const std::uint64_t mag = bits & 0x7FFFFFFFFFFFFFFFull;

    if (mag >= 0x7FF0000000000000ull) // inf or NaN
        return mag > 0x7FF0000000000000ull ? kCanonicalNan
                                           : static_cast<half_t>(sign | kPosInf);
    if (mag >= 0x40EFFE0000000000ull) // >= 65520: rounds past the largest half
        return sign | kPosInf;

    if (mag >= 0x3F10000000000000ull) { // >= 2^-14: normal halves
        // Integer RNE at mantissa bit 42; a carry ripples into the exponent
        // field, which is exactly the desired behavior.
        const std::uint64_t rounded =
            mag + ((std::uint64_t{1} << 41) - 1) + ((mag >> 42) & 1);
        return sign | static_cast<half_t>((rounded >> 42) - (std::uint64_t{1008} << 10));
    }

    // Subnormal halves: scale by 2^24 (exact) and round to integer; ties to
    // even via the default rounding mode. A carry to 1024 lands on the
    // smallest normal pattern by construction.
    const double scaled = std::bit_cast<double>(mag) * 0x1p24;
    const auto sig = static_cast<std::uint32_t>(std::nearbyint(scaled));
    return sign | static_cast<half_t>(sig);
}

/// Fused multiply-add on decoded binary16 operands with a single binary16
/// rounding. The product of two halves is exact in double; the sum is taken
/// in double and forced to round-to-odd using its exact 2Sum residual, after
/// which one round-to-nearest-even to binary16 equals the single rounding of
/// the infinitely precise result (53 bits >= 11 + 2).
inline half_t fma_decoded(double da, double db, double dc) {
    const double p = da * db; // exact: 22-bit significands
    double s = p + dc;
    if (!std::isfinite(s)) [[unlikely]]
        return encode(s); // inf/NaN semantics follow IEEE via double
    const double bv = s - p;
    const double err = (p - (s - bv)) + (dc - bv); // exact residual (2Sum)
    if (err != 0.0) {
        auto bits = std::bit_cast<std::uint64_t>(s);
        if ((bits & 1) == 0) {
            // nudge the even value toward the true sum: round-to-odd
            const bool grow = (err > 0.0) == (s > 0.0);
            bits += grow ? 1 : -1;
            s = std::bit_cast<double>(bits);
        }
    }
    return encode(s);
}

/// Fused multiply-add r = a*b + c with a single binary16 rounding.
/// Specials follow IEEE 754; every NaN result uses the canonical pattern.
inline half_t fma(half_t a, half_t b, half_t c) {
    const double *tab = detail::decode_table();
    return fma_decoded(tab[a], tab[b], tab[c]);
}

/// Correctly rounded binary16 addition (via fma with an exact unit product).
inline half_t add(half_t a, half_t b) { return fma(kOne, a, b); }

/// ReLU on the bit pattern: negatives (including -0) clamp to +0, NaN passes.
inline half_t relu(half_t h) {
    if (is_nan(h))
        return h;
    return sign_bit(h) ? half_t{0} : h;
}

} // namespace scakit::fp16
