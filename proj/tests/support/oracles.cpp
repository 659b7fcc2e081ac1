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

#include "support/oracles.hpp"

#include <cassert>
#include <cmath>
#include <limits>

#include <mpfr.h>

namespace oracle {

namespace {

constexpr std::uint16_t kCanonicalNan = 0x7E00;

/// Scoped binary16 exponent range for MPFR: subnormal min 2^-24 maps to
/// emin -23, max normal 65504 to emax 16 (MPFR significands live in [0.5,1)).
struct Binary16Range {
    mpfr_exp_t saved_emin, saved_emax;
    Binary16Range() : saved_emin(mpfr_get_emin()), saved_emax(mpfr_get_emax()) {
        mpfr_set_emin(-23);
        mpfr_set_emax(16);
    }
    ~Binary16Range() {
        mpfr_set_emin(saved_emin);
        mpfr_set_emax(saved_emax);
    }
};

bool pattern_is_nan(std::uint16_t p) { return (p & 0x7FFF) > 0x7C00; }

/// Packs a double that is exactly a binary16 value (or inf/0) into bits.
std::uint16_t pack_exact(double v) {
    const std::uint16_t sign = std::signbit(v) ? 0x8000 : 0;
    if (v == 0.0)
        return sign;
    const double a = std::fabs(v);
    if (std::isinf(v))
        return sign | 0x7C00;
    int e;
    const double m = std::frexp(a, &e); // a = m * 2^e, m in [0.5, 1)
    if (e - 1 >= -14) {
        const auto sig = static_cast<std::uint32_t>(std::ldexp(m, 11)); // [1024, 2047]
        assert(std::ldexp(m, 11) == static_cast<double>(sig));
        const auto biased = static_cast<std::uint16_t>(e - 1 + 15);
        return sign | static_cast<std::uint16_t>(biased << 10) |
               static_cast<std::uint16_t>(sig & 0x3FF);
    }
    const auto sig = static_cast<std::uint32_t>(std::ldexp(a, 24));
    assert(std::ldexp(a, 24) == static_cast<double>(sig) && sig < 0x400);
    return sign | static_cast<std::uint16_t>(sig);
}

/// Rounds an exact MPFR value to binary16 and packs it.
std::uint16_t round_pack(mpfr_t exact) {
    if (mpfr_nan_p(exact))
        return kCanonicalNan;
    Binary16Range range;
    mpfr_t r;
    mpfr_init2(r, 11);
    int t = mpfr_set(r, exact, MPFR_RNDN);
    t = mpfr_check_range(r, t, MPFR_RNDN);
    t = mpfr_subnormalize(r, t, MPFR_RNDN);
    const double v = mpfr_get_d(r, MPFR_RNDN); // exact: r is representable
    mpfr_clear(r);
    return pack_exact(v);
}

} // namespace

double fp16_value(std::uint16_t p) {
    const int s = (p >> 15) & 1;
    const int e = (p >> 10) & 0x1F;
    const int m = p & 0x3FF;
    double v;
    if (e == 0)
        v = std::ldexp(static_cast<double>(m), -24);
    else if (e == 31)
        v = m == 0 ? std::numeric_limits<double>::infinity()
                   : std::numeric_limits<double>::quiet_NaN();
    else
        v = std::ldexp(static_cast<double>(m + 1024), e - 25);
    return s ? -v : v;
}

std::uint16_t fp16_encode(double x) {
    if (std::isnan(x))
        return kCanonicalNan;
    mpfr_t e;
    mpfr_init2(e, 64);
    mpfr_set_d(e, x, MPFR_RNDN); // exact: 64 >= 53
    const std::uint16_t r = round_pack(e);
    mpfr_clear(e);
    return r;
}

std::uint16_t fp16_fma(std::uint16_t a, std::uint16_t b, std::uint16_t c) {
    if (pattern_is_nan(a) || pattern_is_nan(b) || pattern_is_nan(c))
        return kCanonicalNan;
    mpfr_t ma, mb, mc, prod, sum;
    mpfr_init2(ma, 30);
    mpfr_init2(mb, 30);
    mpfr_init2(mc, 30);
    mpfr_init2(prod, 64);
    mpfr_init2(sum, 256);
    mpfr_set_d(ma, fp16_value(a), MPFR_RNDN);
    mpfr_set_d(mb, fp16_value(b), MPFR_RNDN);
    mpfr_set_d(mc, fp16_value(c), MPFR_RNDN);
    int t = mpfr_mul(prod, ma, mb, MPFR_RNDN);
    assert(t == 0 || mpfr_inf_p(prod) || mpfr_nan_p(prod));
    t = mpfr_add(sum, prod, mc, MPFR_RNDN);
    assert(t == 0 || mpfr_inf_p(sum) || mpfr_nan_p(sum));
    (void)t;
    const std::uint16_t r = round_pack(sum);
    mpfr_clear(ma);
    mpfr_clear(mb);
    mpfr_clear(mc);
    mpfr_clear(prod);
    mpfr_clear(sum);
    return r;
}

std::uint16_t fp16_add(std::uint16_t a, std::uint16_t b) {
    if (pattern_is_nan(a) || pattern_is_nan(b))
        return kCanonicalNan;
    mpfr_t ma, mb, sum;
    mpfr_init2(ma, 30);
    mpfr_init2(mb, 30);
    mpfr_init2(sum, 256);
    mpfr_set_d(ma, fp16_value(a), MPFR_RNDN);
    mpfr_set_d(mb, fp16_value(b), MPFR_RNDN);
    mpfr_add(sum, ma, mb, MPFR_RNDN);
    const std::uint16_t r = round_pack(sum);
    mpfr_clear(ma);
    mpfr_clear(mb);
    mpfr_clear(sum);
    return r;
}

std::int32_t idp4a(const std::int8_t a[4], const std::int8_t b[4], std::int32_t c) {
    __int128 s = c;
    for (int k = 0; k < 4; ++k)
        s += static_cast<__int128>(a[k]) * b[k];
    const auto wrapped = static_cast<std::uint64_t>(
        static_cast<unsigned __int128>(s) & 0xFFFFFFFFu);
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(wrapped));
}

double pearson_two_pass(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size() && x.size() > 1);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

int popcount_loop(std::uint32_t v, int width) {
    int count = 0;
    for (int i = 0; i < width; ++i)
        count += (v >> i) & 1;
    return count;
}

} // namespace oracle
