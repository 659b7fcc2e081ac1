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

// Candidate-space enumeration for correlation attacks. The fp16 space of a
// bounded range is walked directly over bit patterns so the ordering is
// deterministic: ascending decoded value with -0 ordered before +0.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "scakit/errors.hpp"
#include "scakit/half.hpp"

namespace scakit {

enum class Dtype { Fp16, Int8 };

inline const char *to_string(Dtype d) { return d == Dtype::Fp16 ? "fp16" : "int8"; }

struct CandidateSpace {
    Dtype dtype = Dtype::Fp16;
    double lo = 0.0;
    double hi = 0.0;
    // fp16: binary16 patterns in the low 16 bits.
    // int8: two's-complement byte patterns in the low 8 bits.
    std::vector<std::uint32_t> values;

    std::size_t count() const { return values.size(); }

    double value_at(std::size_t i) const {
        if (dtype == Dtype::Fp16)
            return fp16::decode(static_cast<fp16::half_t>(values[i]));
        return static_cast<double>(static_cast<std::int8_t>(static_cast<std::uint8_t>(values[i])));
    }

    /// Index of a pattern, or npos if the pattern is not in the space.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t index_of(std::uint32_t pattern) const {
        const auto it = std::find(values.begin(), values.end(), pattern);
        return it == values.end() ? npos : static_cast<std::size_t>(it - values.begin());
    }
};

/// Every finite binary16 pattern v with lo <= decode(v) <= hi, ascending by
/// decoded value, -0 before +0. For [-5, 5] this yields 35,330 candidates.
inline CandidateSpace enumerate_fp16_candidates(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi)
        throw UsageError("fp16 candidate range requires finite lo <= hi");
    CandidateSpace cs;
    cs.dtype = Dtype::Fp16;
    cs.lo = lo;
    cs.hi = hi;
    // Negative patterns decode to decreasing values as the pattern grows, so
    // walking them downwards yields ascending decoded order; then positives.
    for (std::uint32_t p = 0xFBFF; p >= 0x8000; --p) {
        const auto h = static_cast<fp16::half_t>(p);
        const double v = fp16::decode(h);
        if (v >= lo && v <= hi)
            cs.values.push_back(p);
    }
    for (std::uint32_t p = 0x0000; p <= 0x7BFF; ++p) {
        const auto h = static_cast<fp16::half_t>(p);
        const double v = fp16::decode(h);
        if (v >= lo && v <= hi)
            cs.values.push_back(p);
    }
    return cs;
}

/// The 256 signed 8-bit values -128..127 in ascending order.
inline CandidateSpace enumerate_int8_candidates() {
    CandidateSpace cs;
    cs.dtype = Dtype::Int8;
    cs.lo = -128.0;
    cs.hi = 127.0;
    cs.values.reserve(256);
    for (int v = -128; v <= 127; ++v)
        cs.values.push_back(static_cast<std::uint8_t>(static_cast<std::int8_t>(v)));
    return cs;
}

inline CandidateSpace enumerate_candidates(Dtype dtype, double lo, double hi) {
    if (dtype == Dtype::Int8)
        return enumerate_int8_candidates();
    return enumerate_fp16_candidates(lo, hi);
}

} // namespace scakit
