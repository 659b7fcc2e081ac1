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

// CSV and binary result emitters. Doubles are printed with %.17g so that a
// deterministic computation yields byte-identical artifacts.

#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "scakit/align.hpp"
#include "scakit/attack.hpp"
#include "scakit/candidates.hpp"
#include "scakit/cema.hpp"
#include "scakit/stats.hpp"

namespace scakit {

namespace detail {

inline std::string fmt_f64(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::string &path) {
    std::ofstream out(path);
    if (!out)
        throw Error("cannot create output file: " + path);
    return out;
}

} // namespace detail

inline void write_t_trace_csv(const std::string &path, const TvlaReport &rep) {
    auto out = detail::open_out(path);
    out << "sample,t,degenerate\n";
    for (std::size_t s = 0; s < rep.t_values.size(); ++s)
        out << s << ',' << detail::fmt_f64(rep.t_values[s]) << ','
            << static_cast<int>(rep.degenerate[s]) << '\n';
}

inline void write_leak_points_csv(const std::string &path, const TvlaReport &rep) {
    auto out = detail::open_out(path);
    out << "sample\n";
    for (std::size_t s : rep.leak_points)
        out << s << '\n';
}

inline void write_offsets_csv(const std::string &path, const AlignmentOffsets &off) {
    auto out = detail::open_out(path);
    out << "trace_id,offset,flag\n";
    for (std::size_t i = 0; i < off.offsets.size(); ++i)
        out << i << ',' << off.offsets[i] << ',' << static_cast<int>(off.flags[i]) << '\n';
}

inline void write_rank_curve_csv(const std::string &path,
                                 const std::vector<std::pair<std::size_t, std::size_t>> &curve) {
    auto out = detail::open_out(path);
    out << "n_traces,rank\n";
    for (const auto &[n, r] : curve)
        out << n << ',' << r << '\n';
}

/// Correlation-vs-trace-count curves for the top-m candidates of the final
/// ranking (the paper-style convergence plot data).
inline void write_corr_curves_csv(const std::string &path, const CemaResult &res,
                                  const CandidateSpace &space, std::size_t top_m = 100) {
    auto out = detail::open_out(path);
    out << "n_traces,candidate,value,r\n";
    const std::size_t m = std::min(top_m, res.ranking.size());
    for (const auto &cp : res.checkpoints)
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t c = res.ranking[i];
            char pat[16];
            std::snprintf(pat, sizeof(pat), "0x%04x", space.values[c]);
            out << cp.n_traces << ',' << pat << ',' << detail::fmt_f64(space.value_at(c)) << ','
                << detail::fmt_f64(cp.scores[c]) << '\n';
        }
}

inline void write_recovered_csv(const std::string &path, const AttackResult &res) {
    auto out = detail::open_out(path);
    out << "param,pattern,value,score,runner_up,accepted,traces_used,window_first,window_last\n";
    for (const auto &p : res.params) {
        char pat[16];
        std::snprintf(pat, sizeof(pat), "0x%04x", p.pattern);
        out << p.name << ',' << pat << ',' << detail::fmt_f64(p.value) << ','
            << detail::fmt_f64(p.best_score) << ',' << detail::fmt_f64(p.runner_up) << ','
            << (p.accepted ? 1 : 0) << ',' << p.traces_used << ',' << p.window_first << ','
            << p.window_last << '\n';
    }
}

// --- per-parameter score checkpoints (binary sidecar for `rank`) ---
//
// Layout (little-endian): magic "BCSC", u16 version, u8 dtype, u8 reserved,
// u64 n_candidates, u64 n_checkpoints, n_candidates * u32 candidate
// patterns, then per checkpoint: u64 n_traces + n_candidates * f64 scores.

inline void write_scores_bin(const std::string &path, const CemaResult &res,
                             const CandidateSpace &space) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot create score file: " + path);
    std::string h;
    h += "BCSC";
    detail::put_le(h, 1, 2);
    detail::put_le(h, space.dtype == Dtype::Fp16 ? 0 : 1, 1);
    detail::put_le(h, 0, 1);
    detail::put_le(h, space.count(), 8);
    detail::put_le(h, res.checkpoints.size(), 8);
    for (std::uint32_t p : space.values)
        detail::put_le(h, p, 4);
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const auto &cp : res.checkpoints) {
        std::string rec;
        detail::put_le(rec, cp.n_traces, 8);
        out.write(rec.data(), 8);
        out.write(reinterpret_cast<const char *>(cp.scores.data()),
                  static_cast<std::streamsize>(cp.scores.size() * sizeof(double)));
    }
}

struct ScoreFile {
    Dtype dtype = Dtype::Fp16;
    std::vector<std::uint32_t> patterns;
    std::vector<CemaCheckpoint> checkpoints;
};

inline ScoreFile read_scores_bin(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open score file: " + path);
    unsigned char head[24];
    in.read(reinterpret_cast<char *>(head), sizeof(head));
    if (in.gcount() != sizeof(head) || std::memcmp(head, "BCSC", 4) != 0)
        throw FormatError("not a score file: " + path);
    if (detail::get_le(head + 4, 2) != 1)
        throw FormatError("unsupported score file version");
    ScoreFile sf;
    sf.dtype = head[6] == 0 ? Dtype::Fp16 : Dtype::Int8;
    const std::uint64_t k = detail::get_le(head + 8, 8);
    const std::uint64_t nc = detail::get_le(head + 16, 8);
    sf.patterns.resize(k);
    for (std::uint64_t i = 0; i < k; ++i) {
        unsigned char b[4];
        in.read(reinterpret_cast<char *>(b), 4);
        sf.patterns[i] = static_cast<std::uint32_t>(detail::get_le(b, 4));
    }
    for (std::uint64_t c = 0; c < nc; ++c) {
        unsigned char b[8];
        in.read(reinterpret_cast<char *>(b), 8);
        CemaCheckpoint cp;
        cp.n_traces = detail::get_le(b, 8);
        cp.scores.resize(k);
        in.read(reinterpret_cast<char *>(cp.scores.data()),
                static_cast<std::streamsize>(k * sizeof(double)));
        sf.checkpoints.push_back(std::move(cp));
    }
    if (!in)
        throw IntegrityError("score file truncated: " + path);
    return sf;
}

} // namespace scakit
