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

#include <catch2/catch_amalgamated.hpp>

#include "scakit/rng.hpp"
#include "scakit/simulate.hpp"
#include "scakit/stats.hpp"
#include "support/oracles.hpp"

using namespace scakit;

TEST_CASE("moments update basics", "[stats]") {
    StreamMoments m;
    m.update(2.0, 3.0);
    REQUIRE(m.n == 1);
    REQUIRE(m.mean_x == 2.0);
    REQUIRE(m.mean_y == 3.0);
    REQUIRE(m.m2_x == 0.0);
    REQUIRE(m.m2_y == 0.0);
    REQUIRE(m.c_xy == 0.0);

    StreamMoments c;
    Rng rng(0xC0457);
    for (int i = 0; i < 100; ++i)
        c.update(rng.uniform(-1, 1), 4.25);
    REQUIRE(c.c_xy == 0.0);
    REQUIRE(c.m2_y == 0.0);
}

TEST_CASE("streaming Pearson equals the two-pass oracle within 1e-12", "[stats]") {
    Rng rng(0x9EA2);
    for (int iter = 0; iter < 1000; ++iter) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform_int(0, 998));
        std::vector<double> xs(n), ys(n);
        StreamMoments m;
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = rng.uniform(-10, 10);
            ys[i] = 0.3 * xs[i] + rng.gaussian(0.0, 2.0);
            m.update(xs[i], ys[i]);
        }
        const double r1 = m.pearson();
        const double r2 = oracle::pearson_two_pass(xs, ys);
        REQUIRE(std::fabs(r1 - r2) <= 1e-12);
    }
}

TEST_CASE("merge: identity, halves, fold reassociation", "[stats]") {
    Rng rng(0x6E26E);

    SECTION("merging with the empty moments is the identity") {
        StreamMoments m;
        for (int i = 0; i < 50; ++i)
            m.update(rng.uniform(0, 1), rng.uniform(0, 1));
        const StreamMoments e;
        const StreamMoments a = StreamMoments::merge(m, e);
        const StreamMoments b = StreamMoments::merge(e, m);
        for (const StreamMoments &r : {a, b}) {
            REQUIRE(r.n == m.n);
            REQUIRE(r.mean_x == m.mean_x);
            REQUIRE(r.m2_x == m.m2_x);
            REQUIRE(r.c_xy == m.c_xy);
        }
    }

    SECTION("two halves equal the sequential whole within 1e-12") {
        for (int iter = 0; iter < 200; ++iter) {
            const std::size_t n = 10 + static_cast<std::size_t>(rng.uniform_int(0, 500));
            StreamMoments whole, lo, hi;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = rng.uniform(-5, 5), y = rng.gaussian(0, 3);
                whole.update(x, y);
                (i < n / 2 ? lo : hi).update(x, y);
            }
            const StreamMoments m = StreamMoments::merge(lo, hi);
            REQUIRE(m.n == whole.n);
            REQUIRE(m.mean_x == Catch::Approx(whole.mean_x).epsilon(1e-12));
            REQUIRE(m.m2_x == Catch::Approx(whole.m2_x).epsilon(1e-12));
            REQUIRE(m.m2_y == Catch::Approx(whole.m2_y).epsilon(1e-12));
            REQUIRE(m.c_xy == Catch::Approx(whole.c_xy).epsilon(1e-12).margin(1e-12));
        }
    }

    SECTION("left fold of 10 chunks equals a balanced tree within 1e-9") {
        std::vector<StreamMoments> chunks(10);
        for (auto &c : chunks)
            for (int i = 0; i < 100; ++i)
                c.update(rng.uniform(-2, 2), rng.gaussian(1, 2));
        StreamMoments left;
        for (const auto &c : chunks)
            left = StreamMoments::merge(left, c);
        // balanced: pairwise reduction
        std::vector<StreamMoments> level = chunks;
        while (level.size() > 1) {
            std::vector<StreamMoments> next;
            for (std::size_t i = 0; i + 1 < level.size(); i += 2)
                next.push_back(StreamMoments::merge(level[i], level[i + 1]));
            if (level.size() % 2)
                next.push_back(level.back());
            level = next;
        }
        REQUIRE(left.m2_x == Catch::Approx(level[0].m2_x).epsilon(1e-9));
        REQUIRE(left.m2_y == Catch::Approx(level[0].m2_y).epsilon(1e-9));
        REQUIRE(left.c_xy == Catch::Approx(level[0].c_xy).epsilon(1e-9).margin(1e-9));
        REQUIRE(left.mean_x == Catch::Approx(level[0].mean_x).epsilon(1e-12));
    }
}

TEST_CASE("welch t basics", "[stats]") {
    SECTION("identical groups give t = 0") {
        GroupMoments a, b;
        Rng rng(0x11);
        for (int i = 0; i < 100; ++i) {
            const double v = rng.uniform(0, 1);
            a.update(v);
            b.update(v);
        }
        const WelchResult r = welch_t(a, b);
        REQUIRE(r.t == 0.0);
        REQUIRE_FALSE(r.degenerate);
    }

    SECTION("two constant groups are degenerate, not evidence") {
        GroupMoments a, b;
        for (int i = 0; i < 10; ++i) {
            a.update(0.0);
            b.update(1.0);
        }
        const WelchResult r = welch_t(a, b);
        REQUIRE(r.degenerate);
        REQUIRE(r.t == 0.0);
    }

    SECTION("seeded Gaussian groups match the closed-form expectation") {
        Rng rng(0xA5A5);
        GroupMoments a, b;
        for (int i = 0; i < 1000; ++i) {
            a.update(rng.gaussian(0.0, 1.0));
            b.update(rng.gaussian(0.5, 1.0));
        }
        const double expected = -0.5 / std::sqrt(2.0 / 1000.0);
        const WelchResult r = welch_t(a, b);
        REQUIRE(std::fabs(r.t - expected) < 0.1 * std::fabs(expected));
    }

    SECTION("group swap negates t") {
        Rng rng(0x5A4);
        GroupMoments a, b;
        for (int i = 0; i < 500; ++i) {
            a.update(rng.gaussian(0, 1));
            b.update(rng.gaussian(1, 2));
        }
        REQUIRE(welch_t(a, b).t == -welch_t(b, a).t);
    }

    SECTION("tiny groups are rejected") {
        GroupMoments a, b;
        a.update(1.0);
        b.update(2.0);
        REQUIRE_THROWS_AS(welch_t(a, b), UsageError);
    }
}

TEST_CASE("tvla on noise-only identical distributions stays quiet", "[stats]") {
    // 5000 traces per group of pure seeded Gaussian noise: no sample may
    // cross the 4.5 threshold (false-positive probability ~ 7e-6 per sample).
    MemTraceSet fixed(64), random(64);
    Rng rng(0x7157);
    for (int g = 0; g < 2; ++g)
        for (int i = 0; i < 5000; ++i) {
            std::vector<float> t(64);
            for (auto &v : t)
                v = static_cast<float>(rng.gaussian(0.0, 1.0));
            (g == 0 ? fixed : random).append(t, "id=" + std::to_string(i));
        }
    const TvlaReport rep = tvla(fixed, random, 4.5);
    REQUIRE(rep.leak_points.empty());
    double max_t = 0;
    for (double t : rep.t_values)
        max_t = std::max(max_t, std::fabs(t));
    REQUIRE(max_t < 4.5);
}

TEST_CASE("tvla flags the differing sample and honors the threshold", "[stats]") {
    MemTraceSet fixed(16), random(16);
    Rng rng(0x7158);
    for (int i = 0; i < 2000; ++i) {
        std::vector<float> f(16), r(16);
        for (std::size_t s = 0; s < 16; ++s) {
            f[s] = static_cast<float>(rng.gaussian(0.0, 1.0));
            r[s] = static_cast<float>(rng.gaussian(s == 9 ? 2.0 : 0.0, 1.0));
        }
        fixed.append(f, "");
        random.append(r, "");
    }
    const TvlaReport rep = tvla(fixed, random, 4.5);
    REQUIRE(std::find(rep.leak_points.begin(), rep.leak_points.end(), 9) !=
            rep.leak_points.end());

    // threshold = infinity silences everything
    const TvlaReport quiet =
        tvla(fixed, random, std::numeric_limits<double>::infinity());
    REQUIRE(quiet.leak_points.empty());

    // degenerate flags propagate per sample: both groups constant at sample
    // 0, one group varying at sample 1
    MemTraceSet const_a(4), const_b(4);
    for (int i = 0; i < 10; ++i) {
        const_a.append(std::vector<float>{1, 1, 1, 1}, "");
        const_b.append(std::vector<float>{1, i % 2 ? 2.0f : 3.0f, 1, 1}, "");
    }
    const TvlaReport deg = tvla(const_a, const_b, 4.5);
    REQUIRE(deg.degenerate[0] == 1);
    REQUIRE(deg.degenerate[1] == 0);

    // mismatched lengths are usage errors
    MemTraceSet other(8);
    other.append(std::vector<float>(8, 0.0f), "");
    REQUIRE_THROWS_AS(tvla(fixed, other), UsageError);
}

TEST_CASE("pearson is scale invariant", "[stats]") {
    Rng rng(0x5CA1E);
    for (int iter = 0; iter < 100; ++iter) {
        StreamMoments a, b;
        const double scale = rng.uniform(0.1, 100.0);
        for (int i = 0; i < 300; ++i) {
            const double x = rng.uniform(-1, 1);
            const double y = 0.8 * x + rng.gaussian(0, 0.5);
            a.update(x, y);
            b.update(x, scale * y);
        }
        REQUIRE(std::fabs(a.pearson() - b.pearson()) <= 1e-12);
    }
}
