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

// Static trace alignment: pattern-based rigid shifts. A reference window is
// correlated against each trace at every offset within a bounded range; the
// trace is shifted by the offset maximizing Pearson correlation. Ties break
// toward the smaller |offset|, then the negative one. Flat references or
// flat trace segments cannot be matched; such traces are flagged and passed
// through unshifted.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "scakit/errors.hpp"
#include "scakit/parallel.hpp"
#include "scakit/tracestore.hpp"

namespace scakit {

enum class ReferenceSource { TraceIndex, Explicit, MeanOfFirst };

struct AlignmentConfig {
    std::size_t window_first = 0; // reference window [first, last)
    std::size_t window_last = 0;
    int max_shift = 0;
    ReferenceSource source = ReferenceSource::TraceIndex;
    std::size_t reference_trace = 0;  // TraceIndex
    std::size_t mean_count = 100;     // MeanOfFirst
    std::vector<float> pattern;       // Explicit

    void validate(const TraceSource &src) const {
        if (window_first >= window_last)
            throw UsageError("alignment window is empty");
        if (max_shift < 0)
            throw UsageError("max shift must be >= 0");
        const auto shift = static_cast<std::size_t>(max_shift);
        if (window_first < shift || window_last + shift > src.trace_length())
            throw UsageError("alignment window plus shift range exceeds the trace");
        if (source == ReferenceSource::Explicit &&
            pattern.size() != window_last - window_first)
            throw UsageError("explicit reference pattern does not match the window size");
        if (source == ReferenceSource::TraceIndex && reference_trace >= src.size())
            throw UsageError("reference trace index out of range");
    }
};

/// The reference pattern a configuration designates: a window of one trace,
/// an explicit pattern, or the per-sample mean over the first k traces.
inline std::vector<float> select_reference(const TraceSource &src, const AlignmentConfig &cfg) {
    if (src.size() == 0)
        throw UsageError("cannot select a reference from an empty trace set");
    cfg.validate(src);
    const std::size_t w = cfg.window_last - cfg.window_first;
    switch (cfg.source) {
    case ReferenceSource::Explicit:
        return cfg.pattern;
    case ReferenceSource::TraceIndex: {
        std::vector<float> ref(w);
        src.read(cfg.reference_trace, 1, cfg.window_first, cfg.window_last, ref.data());
        return ref;
    }
    case ReferenceSource::MeanOfFirst: {
        const std::size_t k = std::min(cfg.mean_count, src.size());
        if (k == 0)
            throw UsageError("mean reference needs at least one trace");
        std::vector<double> acc(w, 0.0);
        std::vector<float> row(w);
        for (std::size_t i = 0; i < k; ++i) {
            src.read(i, 1, cfg.window_first, cfg.window_last, row.data());
            for (std::size_t s = 0; s < w; ++s)
                acc[s] += row[s];
        }
        std::vector<float> ref(w);
        for (std::size_t s = 0; s < w; ++s)
            ref[s] = static_cast<float>(acc[s] / static_cast<double>(k));
        return ref;
    }
    }
    throw UsageError("unknown reference source");
}

struct AlignmentOffsets {
    std::vector<int> offsets;        // per trace
    std::vector<std::uint8_t> flags; // 1 = alignment failed, passed through
};

namespace detail {

/// Pearson correlation between the reference and a trace segment; returns
/// false when either side has zero variance.
inline bool window_correlation(const float *ref, const float *seg, std::size_t w, double &r) {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < w; ++i) {
        const double x = ref[i], y = seg[i];
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    const double n = static_cast<double>(w);
    const double vx = sxx - sx * sx / n;
    const double vy = syy - sy * sy / n;
    if (!(vx > 0.0) || !(vy > 0.0))
        return false;
    r = (sxy - sx * sy / n) / std::sqrt(vx * vy);
    return true;
}

inline bool better_tie(int cand, int best) {
    const int ac = cand < 0 ? -cand : cand;
    const int ab = best < 0 ? -best : best;
    if (ac != ab)
        return ac < ab;
    return cand < best;
}

} // namespace detail

/// Aligns every trace of `src` against the reference: the offset maximizing
/// correlation within [-max_shift, max_shift] is found and the trace shifted
/// by its negative, zero-padded at the edges. Aligned traces are appended to
/// `sink` in input order.
inline AlignmentOffsets static_align(const TraceSource &src, const AlignmentConfig &cfg,
                                     TraceSink &sink, int workers = 0) {
    cfg.validate(src);
    const std::vector<float> ref = select_reference(src, cfg);
    const std::size_t w = cfg.window_last - cfg.window_first;
    const std::size_t len = src.trace_length();
    const std::size_t n = src.size();
    const int nw = resolve_workers(workers);

    // A flat reference can never be matched; flag everything up front.
    bool ref_flat = true;
    for (std::size_t i = 1; i < w && ref_flat; ++i)
        ref_flat = (ref[i] == ref[0]);

    AlignmentOffsets out;
    out.offsets.assign(n, 0);
    out.flags.assign(n, 0);

    const std::size_t batch_sz = 512;
    std::vector<std::vector<float>> shifted(batch_sz);
    std::vector<float> buf(batch_sz * len);

    for (std::size_t first = 0; first < n; first += batch_sz) {
        const std::size_t count = std::min(batch_sz, n - first);
        src.read(first, count, 0, len, buf.data());
        parallel_for_blocks(count, nw, [&](std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) {
                const float *trace = buf.data() + k * len;
                int best_off = 0;
                double best_r = 0.0;
                bool found = false;
                if (!ref_flat) {
                    for (int off = -cfg.max_shift; off <= cfg.max_shift; ++off) {
                        double r;
                        const float *seg = trace + (static_cast<std::ptrdiff_t>(cfg.window_first) + off);
                        if (!detail::window_correlation(ref.data(), seg, w, r))
                            continue;
                        if (!found || r > best_r ||
                            (r == best_r && detail::better_tie(off, best_off))) {
                            found = true;
                            best_r = r;
                            best_off = off;
                        }
                    }
                }
                std::vector<float> aligned(len, 0.0f);
                if (!found) {
                    out.flags[first + k] = 1;
                    best_off = 0;
                    std::copy(trace, trace + len, aligned.begin());
                } else {
                    out.offsets[first + k] = best_off;
                    // Shift by -offset: content found at +off moves back to
                    // the reference position.
                    for (std::size_t i = 0; i < len; ++i) {
                        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + best_off;
                        if (j >= 0 && j < static_cast<std::ptrdiff_t>(len))
                            aligned[i] = trace[j];
                    }
                }
                shifted[k] = std::move(aligned);
            }
        });
        for (std::size_t k = 0; k < count; ++k)
            sink.append(shifted[k], std::string(src.meta(first + k)));
    }
    return out;
}

} // namespace scakit
