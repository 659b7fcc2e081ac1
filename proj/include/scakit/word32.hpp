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

// A 32-bit GPU register image with the three views the reduced-precision
// kernels use: two binary16 lanes, four signed 8-bit lanes, or one signed
// 32-bit accumulator.

#pragma once

#include <cstdint>

#include "scakit/half.hpp"

namespace scakit {

struct Word32 {
    std::uint32_t bits = 0;

    friend bool operator==(Word32 a, Word32 b) { return a.bits == b.bits; }

    // --- two binary16 lanes; lane i occupies bits [16i, 16i+16) ---

    fp16::half_t half_lane(int i) const {
        return static_cast<fp16::half_t>(bits >> (16 * i));
    }

    void set_half_lane(int i, fp16::half_t h) {
        const int sh = 16 * i;
        bits = (bits & ~(0xFFFFu << sh)) | (static_cast<std::uint32_t>(h) << sh);
    }

    static Word32 from_halves(fp16::half_t lo, fp16::half_t hi) {
        return {static_cast<std::uint32_t>(lo) | (static_cast<std::uint32_t>(hi) << 16)};
    }

    // --- four signed 8-bit lanes; lane k occupies bits [8k, 8k+8) ---

    std::int8_t int8_lane(int k) const {
        return static_cast<std::int8_t>(static_cast<std::uint8_t>(bits >> (8 * k)));
    }

    void set_int8_lane(int k, std::int8_t v) {
        const int sh = 8 * k;
        bits = (bits & ~(0xFFu << sh))
             | (static_cast<std::uint32_t>(static_cast<std::uint8_t>(v)) << sh);
    }

    static Word32 from_int8(std::int8_t a, std::int8_t b, std::int8_t c, std::int8_t d) {
        Word32 w;
        w.set_int8_lane(0, a);
        w.set_int8_lane(1, b);
        w.set_int8_lane(2, c);
        w.set_int8_lane(3, d);
        return w;
    }

    // --- one signed 32-bit accumulator ---

    std::int32_t as_i32() const { return static_cast<std::int32_t>(bits); }

    static Word32 from_i32(std::int32_t v) { return {static_cast<std::uint32_t>(v)}; }
};

/// Two-lane half-precision fused multiply-add: per lane i,
/// r.lane[i] = fma(a.lane[i], b.lane[i], c.lane[i]) with a single rounding.
inline Word32 hfma2(Word32 a, Word32 b, Word32 c) {
    return Word32::from_halves(fp16::fma(a.half_lane(0), b.half_lane(0), c.half_lane(0)),
                               fp16::fma(a.half_lane(1), b.half_lane(1), c.half_lane(1)));
}

/// Four-way signed 8-bit dot product accumulated into a signed 32-bit
/// register: c + sum(a.lane[k] * b.lane[k]). Overflow wraps (two's
/// complement); realistic layer magnitudes never approach 2^31.
inline std::int32_t idp4a(Word32 a, Word32 b, std::int32_t c) {
    std::uint32_t acc = static_cast<std::uint32_t>(c);
    for (int k = 0; k < 4; ++k) {
        const std::int32_t p = static_cast<std::int32_t>(a.int8_lane(k))
                             * static_cast<std::int32_t>(b.int8_lane(k));
        acc += static_cast<std::uint32_t>(p);
    }
    return static_cast<std::int32_t>(acc);
}

} // namespace scakit
