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

// Streaming statistics: combinable bivariate moments (Welford updates, Chan
// merges), Welch's t-test and the fixed-vs-random TVLA report.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "scakit/errors.hpp"
#include "scakit/tracestore.hpp"

namespace scakit {

/// First and second-order moments of an (x, y) stream: count, means,
/// centered second moments and co-moment. Combinable across subsets.
struct StreamMoments {
    std::uint64_t n = 0;
    double mean_x = 0.0, mean_y = 0.0;
    double m2_x = 0.0, m2_y = 0.0;
    double c_xy = 0.0;

    /// One-pass (Welford) update with a new pair.
    void update(double x, double y) {
        n += 1;
        const double inv = 1.0 / static_cast<double>(n);
        const double dx = x - mean_x;
        mean_x += dx * inv;
        const double dxn = x - mean_x;
        m2_x += dx * dxn;
        const double dy = y - mean_y;
        mean_y += dy * inv;
        const double dyn = y - mean_y;
        m2_y += dy * dyn;
        c_xy += dx * dyn;
    }

    /// Parallel combination (Chan et al.) of two subsets' moments.
    static StreamMoments merge(const StreamMoments &a, const StreamMoments &b) {
        if (a.n == 0)
            return b;
        if (b.n == 0)
            return a;
        StreamMoments r;
        const double na = static_cast<double>(a.n), nb = static_cast<double>(b.n);
        const double nn = na + nb;
        const double dx = b.mean_x - a.mean_x;
        const double dy = b.mean_y - a.mean_y;
        const double w = na * nb / nn;
        r.n = a.n + b.n;
        r.mean_x = a.mean_x + dx * nb / nn;
        r.mean_y = a.mean_y + dy * nb / nn;
        r.m2_x = a.m2_x + b.m2_x + dx * dx * w;
        r.m2_y = a.m2_y + b.m2_y + dy * dy * w;
        r.c_xy = a.c_xy + b.c_xy + dx * dy * w;
        return r;
    }

    double var_x() const { return n > 1 ? m2_x / static_cast<double>(n - 1) : 0.0; }
    double var_y() const { return n > 1 ? m2_y / static_cast<double>(n - 1) : 0.0; }

    /// Pearson r; degenerate (either variance ~ 0) reports r = 0 so rankings
    /// stay total.
    double pearson(bool *degenerate = nullptr) const {
        const double denom = m2_x * m2_y;
        if (n < 2 || !(denom > 0.0)) {
            if (degenerate)
                *degenerate = true;
            return 0.0;
        }
        if (degenerate)
            *degenerate = false;
        return c_xy / std::sqrt(denom);
    }
};

/// Univariate view for group statistics (x stream only).
struct GroupMoments {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void update(double x) {
        n += 1;
        const double dx = x - mean;
        mean += dx / static_cast<double>(n);
        m2 += dx * (x - mean);
    }

    static GroupMoments merge(const GroupMoments &a, const GroupMoments &b) {
        if (a.n == 0)
            return b;
        if (b.n == 0)
            return a;
        GroupMoments r;
        const double na = static_cast<double>(a.n), nb = static_cast<double>(b.n);
        const double d = b.mean - a.mean;
        r.n = a.n + b.n;
        r.mean = a.mean + d * nb / (na + nb);
        r.m2 = a.m2 + b.m2 + d * d * na * nb / (na + nb);
        return r;
    }

    double var() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
};

struct WelchResult {
    double t = 0.0;
    bool degenerate = false; // both variances zero: "no variation" marker
};

/// Welch's t between two groups given their streaming moments. Requires
/// n >= 2 per group; both variances zero is flagged degenerate with t = 0.
inline WelchResult welch_t(const GroupMoments &a, const GroupMoments &b) {
    if (a.n < 2 || b.n < 2)
        throw UsageError("Welch's t requires at least two samples per group");
    const double se2 = a.var() / static_cast<double>(a.n) + b.var() / static_cast<double>(b.n);
    if (!(se2 > 0.0))
        return {0.0, true};
    return {(a.mean - b.mean) / std::sqrt(se2), false};
}

struct TvlaReport {
    std::vector<double> t_values;
    std::vector<std::uint8_t> degenerate;
    std::vector<std::size_t> leak_points; // |t| > threshold
    double threshold = 4.5;
    std::uint64_t n_fixed = 0, n_random = 0;
};

/// Fixed-vs-random TVLA: per-sample Welch's t between the two trace sets;
/// samples with |t| above the threshold are flagged as leakage.
inline TvlaReport tvla(const TraceSource &fixed, const TraceSource &random,
                       double threshold = 4.5, std::size_t chunk_size = 4096) {
    if (fixed.trace_length() != random.trace_length())
        throw UsageError("TVLA groups must have equal trace lengths");
    const std::size_t w = fixed.trace_length();

    std::vector<GroupMoments> ma(w), mb(w);
    auto accumulate = [&](const TraceSource &src, std::vector<GroupMoments> &m) {
        iterate_chunks(src, chunk_size, [&](std::size_t, std::size_t count, const float *data) {
            for (std::size_t t = 0; t < count; ++t)
                for (std::size_t s = 0; s < w; ++s)
                    m[s].update(static_cast<double>(data[t * w + s]));
        });
    };
    accumulate(fixed, ma);
    accumulate(random, mb);

    TvlaReport rep;
    rep.threshold = threshold;
    rep.n_fixed = fixed.size();
    rep.n_random = random.size();
    rep.t_values.resize(w);
    rep.degenerate.resize(w);
    for (std::size_t s = 0; s < w; ++s) {
        const WelchResult r = welch_t(ma[s], mb[s]);
        rep.t_values[s] = r.t;
        rep.degenerate[s] = r.degenerate ? 1 : 0;
        if (std::fabs(r.t) > threshold)
            rep.leak_points.push_back(s);
    }
    return rep;
}

} // namespace scakit
