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

// One-pass correlation analysis over a (candidate x sample) grid.
//
// The engine streams the trace set once in chunks. Each chunk contributes
// chunk-local bivariate moments per cell, folded into the global cells with
// the Chan combination in ascending chunk order. The fold order is fixed, so
// a run is bit-reproducible for a given chunking, and different chunkings
// agree within floating-point reassociation error. Hypothesis values are
// small integers (Hamming weights/distances), so chunk-local sums of x and
// x^2 are exact in 64-bit integers.
//
// Parallelism: candidate blocks are processed by independent workers writing
// disjoint cells; the trace stream and the per-cell fold order never change,
// so results are identical for any worker count.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "scakit/parallel.hpp"
#include "scakit/stats.hpp"
#include "scakit/tracestore.hpp"

namespace scakit {

/// Supplies hypothesis leakage values for (candidate, trace) pairs. Values
/// must be small non-negative integers (Hamming weights fit in a byte).
class HypothesisSource {
  public:
    virtual ~HypothesisSource() = default;

    virtual std::size_t candidate_count() const = 0;

    /// Called once per chunk before fill(); computes per-trace context.
    virtual void prepare(std::size_t first, std::size_t count) = 0;

    /// Fills out[(c - c0) * count + k] for candidates [c0, c1) and the
    /// prepared chunk's traces [0, count).
    virtual void fill(std::size_t c0, std::size_t c1, std::size_t count,
                      std::uint8_t *out) const = 0;
};

struct CemaCheckpoint {
    std::size_t n_traces = 0;
    std::vector<double> scores; // per candidate: max |r| over the window
};

struct CemaResult {
    std::size_t n_traces = 0;
    std::size_t window_first = 0; // absolute sample index of the window start
    std::size_t window_width = 0;
    std::vector<double> corr;             // candidate x sample, signed r (final)
    std::vector<std::uint8_t> degenerate; // candidate x sample
    std::vector<double> best_abs;         // per candidate
    std::vector<std::size_t> best_sample; // per candidate, absolute index
    std::vector<std::size_t> ranking;     // candidate indices, best first
    std::vector<CemaCheckpoint> checkpoints;
};

struct CemaConfig {
    std::size_t window_first = 0;
    std::size_t window_last = 0; // half-open
    std::size_t chunk_size = 4096;
    std::vector<std::size_t> checkpoints; // ascending trace counts; final n is implicit
    int workers = 0;
};

/// Ten log-spaced checkpoints up to n (the paper-style convergence grid).
inline std::vector<std::size_t> log_checkpoints(std::size_t n, int points = 10) {
    std::vector<std::size_t> cps;
    if (n < 2 || points < 1)
        return cps;
    const double lo = std::log10(10.0), hi = std::log10(static_cast<double>(n));
    for (int i = 0; i < points; ++i) {
        const double f = points == 1 ? 1.0 : static_cast<double>(i) / (points - 1);
        auto v = static_cast<std::size_t>(std::llround(std::pow(10.0, lo + f * (hi - lo))));
        v = std::min(std::max<std::size_t>(v, 2), n);
        if (cps.empty() || v > cps.back())
            cps.push_back(v);
    }
    return cps;
}

namespace detail {

struct CellSums {
    std::int64_t sh = 0, sh2 = 0;
};

inline void rank_candidates(const std::vector<double> &scores, std::vector<std::size_t> &ranking) {
    ranking.resize(scores.size());
    for (std::size_t i = 0; i < ranking.size(); ++i)
        ranking[i] = i;
    std::sort(ranking.begin(), ranking.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b])
            return scores[a] > scores[b];
        return a < b; // ties broken by enumeration order
    });
}

} // namespace detail

/// Runs CEMA over the window: Pearson r between each candidate's hypothesis
/// column and each sample column, computed via combinable streaming moments
/// under the chunked contract. Checkpoints snapshot the per-candidate scores
/// at intermediate trace counts.
inline CemaResult cema(const TraceSource &traces, HypothesisSource &hyp, const CemaConfig &cfg) {
    const std::size_t n = traces.size();
    const std::size_t K = hyp.candidate_count();
    if (cfg.window_first >= cfg.window_last)
        throw UsageError("empty CEMA window");
    traces.check_window(cfg.window_first, cfg.window_last);
    if (cfg.chunk_size == 0)
        throw UsageError("chunk size must be positive");
    if (n < 2)
        throw UsageError("CEMA needs at least two traces");
    const std::size_t W = cfg.window_last - cfg.window_first;
    const int workers = resolve_workers(cfg.workers);

    std::vector<std::size_t> cps = cfg.checkpoints;
    std::sort(cps.begin(), cps.end());
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());

    // Chunk boundaries: multiples of chunk_size split at checkpoint counts.
    std::vector<std::size_t> bounds;
    for (std::size_t b = cfg.chunk_size; b < n; b += cfg.chunk_size)
        bounds.push_back(b);
    for (std::size_t c : cps)
        if (c > 0 && c < n)
            bounds.push_back(c);
    bounds.push_back(n);
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

    std::vector<StreamMoments> cells(K * W);
    std::vector<float> ybuf;

    CemaResult res;
    res.window_first = cfg.window_first;
    res.window_width = W;

    auto snapshot_scores = [&](std::size_t n_now) {
        CemaCheckpoint cp;
        cp.n_traces = n_now;
        cp.scores.assign(K, 0.0);
        parallel_for_blocks(K, workers, [&](std::size_t b, std::size_t e) {
            for (std::size_t c = b; c < e; ++c) {
                double best = 0.0;
                for (std::size_t s = 0; s < W; ++s) {
                    const double r = std::fabs(cells[c * W + s].pearson());
                    if (r > best)
                        best = r;
                }
                cp.scores[c] = best;
            }
        });
        res.checkpoints.push_back(std::move(cp));
    };

    std::size_t next_checkpoint = 0;
    auto checkpoint_due = [&](std::size_t n_now) {
        bool due = false;
        while (next_checkpoint < cps.size() && cps[next_checkpoint] <= n_now) {
            due = cps[next_checkpoint] == n_now;
            ++next_checkpoint;
        }
        return due;
    };

    std::size_t first = 0;
    for (std::size_t bound : bounds) {
        const std::size_t m = bound - first;
        ybuf.resize(m * W);
        traces.read(first, m, cfg.window_first, cfg.window_last, ybuf.data());
        hyp.prepare(first, m);

        // Per-sample chunk sums are shared by every candidate.
        std::vector<double> sy(W, 0.0), sy2(W, 0.0);
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t s = 0; s < W; ++s) {
                const double y = ybuf[k * W + s];
                sy[s] += y;
                sy2[s] += y * y;
            }

        // Column-major copy of the window in f64 keeps the co-moment loops
        // pure double dot products (vectorizable, deterministic order).
        std::vector<double> ycol(W * m);
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t s = 0; s < W; ++s)
                ycol[s * m + k] = static_cast<double>(ybuf[k * W + s]);

        // Candidate blocks run on independent workers; each owns disjoint
        // cells and its own hypothesis buffer.
        const std::size_t block = 4096;
        parallel_for_blocks((K + block - 1) / block, workers, [&](std::size_t bb, std::size_t be) {
            std::vector<std::uint8_t> local(std::min(block, K) * m);
            std::vector<double> hd(m);
            for (std::size_t bi = bb; bi < be; ++bi) {
                const std::size_t c0 = bi * block;
                const std::size_t c1 = std::min(c0 + block, K);
                hyp.fill(c0, c1, m, local.data());
                for (std::size_t c = c0; c < c1; ++c) {
                    const std::uint8_t *h = local.data() + (c - c0) * m;
                    std::int64_t sh = 0, sh2 = 0;
                    for (std::size_t k = 0; k < m; ++k) {
                        sh += h[k];
                        sh2 += static_cast<std::int64_t>(h[k]) * h[k];
                        hd[k] = static_cast<double>(h[k]);
                    }
                    const double mean_x = static_cast<double>(sh) / static_cast<double>(m);
                    const double m2x = static_cast<double>(sh2) -
                                       static_cast<double>(sh) * static_cast<double>(sh) /
                                           static_cast<double>(m);
                    for (std::size_t s = 0; s < W; ++s) {
                        const double *y = ycol.data() + s * m;
                        // fixed 4-lane reassociation: fast and repeatable
                        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                        std::size_t k = 0;
                        for (; k + 4 <= m; k += 4) {
                            a0 += hd[k] * y[k];
                            a1 += hd[k + 1] * y[k + 1];
                            a2 += hd[k + 2] * y[k + 2];
                            a3 += hd[k + 3] * y[k + 3];
                        }
                        for (; k < m; ++k)
                            a0 += hd[k] * y[k];
                        const double shy = (a0 + a1) + (a2 + a3);
                        StreamMoments chunk;
                        chunk.n = m;
                        chunk.mean_x = mean_x;
                        chunk.mean_y = sy[s] / static_cast<double>(m);
                        chunk.m2_x = m2x;
                        chunk.m2_y = sy2[s] - sy[s] * sy[s] / static_cast<double>(m);
                        chunk.c_xy = shy - static_cast<double>(sh) * sy[s] / static_cast<double>(m);
                        StreamMoments &cell = cells[c * W + s];
                        cell = StreamMoments::merge(cell, chunk);
                    }
                }
            }
        });

        first = bound;
        if (checkpoint_due(first) && first != n)
            snapshot_scores(first);
    }

    // Final correlation grid, scores and ranking.
    res.n_traces = n;
    res.corr.assign(K * W, 0.0);
    res.degenerate.assign(K * W, 0);
    res.best_abs.assign(K, 0.0);
    res.best_sample.assign(K, cfg.window_first);
    parallel_for_blocks(K, workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t c = b; c < e; ++c) {
            double best = -1.0;
            std::size_t best_s = cfg.window_first;
            for (std::size_t s = 0; s < W; ++s) {
                bool degen = false;
                const double r = cells[c * W + s].pearson(&degen);
                res.corr[c * W + s] = r;
                res.degenerate[c * W + s] = degen ? 1 : 0;
                const double a = std::fabs(r);
                if (a > best) {
                    best = a;
                    best_s = cfg.window_first + s;
                }
            }
            res.best_abs[c] = best < 0.0 ? 0.0 : best;
            res.best_sample[c] = best_s;
        }
    });
    detail::rank_candidates(res.best_abs, res.ranking);

    CemaCheckpoint final_cp;
    final_cp.n_traces = n;
    final_cp.scores = res.best_abs;
    res.checkpoints.push_back(std::move(final_cp));
    return res;
}

/// Rank of the true candidate (0 = best). Ties resolve by enumeration order.
inline std::size_t key_rank_at(const std::vector<double> &scores, std::size_t truth_index) {
    const double ts = scores[truth_index];
    std::size_t rank = 0;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        if (scores[c] > ts || (scores[c] == ts && c < truth_index))
            ++rank;
    }
    return rank;
}

inline std::size_t key_rank(const CemaResult &res, std::size_t truth_index) {
    if (truth_index >= res.best_abs.size())
        throw UsageError("true candidate is not in the candidate space");
    return key_rank_at(res.best_abs, truth_index);
}

/// (n_traces, rank) at every checkpoint.
inline std::vector<std::pair<std::size_t, std::size_t>> rank_curve(const CemaResult &res,
                                                                   std::size_t truth_index) {
    if (truth_index >= res.best_abs.size())
        throw UsageError("true candidate is not in the candidate space");
    std::vector<std::pair<std::size_t, std::size_t>> curve;
    curve.reserve(res.checkpoints.size());
    for (const auto &cp : res.checkpoints)
        curve.emplace_back(cp.n_traces, key_rank_at(cp.scores, truth_index));
    return curve;
}

} // namespace scakit
