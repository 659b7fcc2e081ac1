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

// Deterministic random number generation. The standard library distributions
// are implementation-defined, so campaigns use a fixed xoshiro256++ generator
// with explicit sampling algorithms: identical seeds give identical streams
// on every platform. Per-trace streams are derived from (master seed,
// stream id, salt), which makes trace synthesis order-independent.

#pragma once

#include <cmath>
#include <cstdint>

namespace scakit {

inline std::uint64_t splitmix64(std::uint64_t &state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed, a stream id (e.g.
/// trace id) and a salt separating the different uses of one stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t salt) {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s ^= stream + 0xD1B54A32D192ED03ull;
    std::uint64_t b = splitmix64(s);
    s ^= salt + 0x8CB92BA72F3D8DD7ull;
    std::uint64_t c = splitmix64(s);
    return a ^ (b + (c << 1));
}

namespace seed_salt {
inline constexpr std::uint64_t kInputs = 0x101;
inline constexpr std::uint64_t kNoise = 0x202;
inline constexpr std::uint64_t kWeights = 0x303;
inline constexpr std::uint64_t kTvlaTarget = 0x404;
inline constexpr std::uint64_t kFixedInputs = 0x505;
} // namespace seed_salt

/// xoshiro256++ (Blackman & Vigna) seeded through splitmix64.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto &w : state_)
            w = splitmix64(sm);
        have_cached_gauss_ = false;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    /// Uniform integer in [lo, hi], inclusive. Unbiased via masked rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0)
            return static_cast<std::int64_t>(next_u64()); // full 64-bit range
        std::uint64_t mask = span - 1;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        mask |= mask >> 32;
        std::uint64_t v;
        do {
            v = next_u64() & mask;
        } while (v >= span);
        return lo + static_cast<std::int64_t>(v);
    }

    /// Standard normal via the Marsaglia polar method (pairs cached).
    double gaussian() {
        if (have_cached_gauss_) {
            have_cached_gauss_ = false;
            return cached_gauss_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        cached_gauss_ = v * f;
        have_cached_gauss_ = true;
        return u * f;
    }

    double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    double cached_gauss_ = 0.0;
    bool have_cached_gauss_ = false;
};

} // namespace scakit
