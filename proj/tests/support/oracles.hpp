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

// Independent reference implementations used only by tests. The binary16
// oracles go through MPFR (11-bit precision, binary16 exponent range,
// subnormalize); none of this code shares a path with the library.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace oracle {

/// Exact value of a binary16 pattern (independent decoder).
double fp16_value(std::uint16_t pattern);

/// Round a real to binary16 (RNE) via MPFR.
std::uint16_t fp16_encode(double x);

/// Fused multiply-add a*b + c with one binary16 rounding, via MPFR.
std::uint16_t fp16_fma(std::uint16_t a, std::uint16_t b, std::uint16_t c);

/// Correctly rounded binary16 addition via MPFR.
std::uint16_t fp16_add(std::uint16_t a, std::uint16_t b);

/// 4-way signed 8-bit dot product + accumulate, exact in 128-bit integers
/// reduced mod 2^32.
std::int32_t idp4a(const std::int8_t a[4], const std::int8_t b[4], std::int32_t c);

/// Two-pass Pearson correlation.
double pearson_two_pass(std::span<const double> x, std::span<const double> y);

/// Bit-loop population count over the low `width` bits.
int popcount_loop(std::uint32_t v, int width);

} // namespace oracle
