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

// Leakage simulation. Each recorded register write leaks once per step
// (amplitude scale * HW or HD of the write), embedded in Gaussian noise and
// shifted by a per-trace rigid jitter. Campaign runners generate the trace
// sets the attack pipeline consumes: random known-input sets, fixed-vs-random
// TVLA pairs, and chosen-input sets with masked lanes.
//
// Determinism contract: every trace derives its own input and noise streams
// from (master seed, trace id, salt). Same seed, same configuration: byte
// identical output, regardless of worker count.

#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scakit/candidates.hpp"
#include "scakit/errors.hpp"
#include "scakit/execute.hpp"
#include "scakit/parallel.hpp"
#include "scakit/rng.hpp"
#include "scakit/schedule.hpp"
#include "scakit/tracestore.hpp"

namespace scakit {

struct LeakageSpec {
    LeakModel model = LeakModel::HW;
    double scale = 1.0;
    double noise_sigma = 0.0;
    int samples_per_step = 10;
    int leak_offset = 4;
    int jitter_max = 0;
    double baseline = 0.0;

    void validate() const {
        if (!(scale > 0.0))
            throw UsageError("leakage scale must be positive");
        if (noise_sigma < 0.0)
            throw UsageError("noise sigma must be >= 0");
        if (samples_per_step < 1 || leak_offset < 0 || leak_offset >= samples_per_step)
            throw UsageError("leak offset must lie within a step");
        if (jitter_max < 0)
            throw UsageError("jitter bound must be >= 0");
    }

    std::size_t trace_length(std::size_t captured_steps) const {
        return captured_steps * static_cast<std::size_t>(samples_per_step) +
               2 * static_cast<std::size_t>(jitter_max);
    }
};

struct Trace {
    std::vector<float> samples;
    int applied_jitter = 0;
};

/// Renders one intermediate-value sequence as a leakage trace. The jitter
/// shift is drawn first, then noise in sample order; the shifted trace is
/// zero-padded at the edges.
inline Trace synthesize_trace(const IntermediateSequence &seq, const LeakageSpec &spec,
                              std::uint64_t noise_seed) {
    spec.validate();
    if (seq.records.empty())
        throw UsageError("cannot synthesize a trace from an empty sequence");

    const std::size_t n_steps = seq.records.size();
    const std::size_t spp = static_cast<std::size_t>(spec.samples_per_step);
    const std::size_t core = n_steps * spp;

    Rng rng(noise_seed);
    const int jitter =
        spec.jitter_max > 0
            ? static_cast<int>(rng.uniform_int(-spec.jitter_max, spec.jitter_max))
            : 0;

    std::vector<double> u(core);
    for (std::size_t i = 0; i < core; ++i)
        u[i] = spec.baseline + (spec.noise_sigma > 0.0 ? rng.gaussian(0.0, spec.noise_sigma) : 0.0);
    for (std::size_t k = 0; k < n_steps; ++k)
        u[k * spp + static_cast<std::size_t>(spec.leak_offset)] +=
            spec.scale * leak_value(seq.records[k], spec.model);

    Trace t;
    t.applied_jitter = jitter;
    t.samples.assign(spec.trace_length(n_steps), 0.0f);
    const std::size_t base = static_cast<std::size_t>(spec.jitter_max + jitter);
    for (std::size_t i = 0; i < core; ++i)
        t.samples[base + i] = static_cast<float>(u[i]);
    return t;
}

// --- per-trace metadata ---

struct TraceMeta {
    std::uint64_t id = 0;
    std::uint64_t input_seed = 0;
    int jitter = 0;
    int lane = -1; // active lane of chosen-input distributions, -1 otherwise
    std::vector<std::vector<std::uint32_t>> inputs; // per instance, element bit patterns
    std::vector<std::array<std::uint32_t, 3>> gt;   // per output: c_sum, c_out, c_f
};

namespace detail {

inline void append_hex(std::string &s, std::uint32_t v, int digits) {
    static const char *hexd = "0123456789abcdef";
    for (int i = digits - 1; i >= 0; --i)
        s.push_back(hexd[(v >> (4 * i)) & 0xF]);
}

inline std::uint32_t parse_hex(std::string_view s) {
    std::uint32_t v = 0;
    for (char c : s) {
        v <<= 4;
        if (c >= '0' && c <= '9')
            v |= static_cast<std::uint32_t>(c - '0');
        else if (c >= 'a' && c <= 'f')
            v |= static_cast<std::uint32_t>(c - 'a' + 10);
        else
            throw FormatError("bad hex digit in trace metadata");
    }
    return v;
}

} // namespace detail

inline std::string format_meta(const TraceMeta &m, Dtype dtype) {
    std::string s = "id=" + std::to_string(m.id);
    s += " seed=";
    detail::append_hex(s, static_cast<std::uint32_t>(m.input_seed >> 32), 8);
    detail::append_hex(s, static_cast<std::uint32_t>(m.input_seed), 8);
    s += " jitter=" + std::to_string(m.jitter);
    s += " lane=" + std::to_string(m.lane);
    s += " in=";
    const int digits = dtype == Dtype::Fp16 ? 4 : 2;
    for (std::size_t i = 0; i < m.inputs.size(); ++i) {
        if (i)
            s.push_back(';');
        for (std::uint32_t p : m.inputs[i])
            detail::append_hex(s, p, digits);
    }
    if (!m.gt.empty()) {
        s += " gt=";
        for (std::size_t i = 0; i < m.gt.size(); ++i) {
            if (i)
                s.push_back(';');
            detail::append_hex(s, m.gt[i][0], 8);
            s.push_back(',');
            detail::append_hex(s, m.gt[i][1], 8);
            s.push_back(',');
            detail::append_hex(s, m.gt[i][2], 8);
        }
    }
    return s;
}

inline TraceMeta parse_meta(std::string_view rec, Dtype dtype) {
    TraceMeta m;
    const int digits = dtype == Dtype::Fp16 ? 4 : 2;
    std::size_t pos = 0;
    while (pos < rec.size()) {
        std::size_t sp = rec.find(' ', pos);
        if (sp == std::string_view::npos)
            sp = rec.size();
        const std::string_view field = rec.substr(pos, sp - pos);
        pos = sp + 1;
        const std::size_t eq = field.find('=');
        if (eq == std::string_view::npos)
            throw FormatError("malformed trace metadata field");
        const std::string_view key = field.substr(0, eq);
        const std::string_view val = field.substr(eq + 1);
        if (key == "id")
            m.id = std::strtoull(std::string(val).c_str(), nullptr, 10);
        else if (key == "seed")
            m.input_seed = (static_cast<std::uint64_t>(detail::parse_hex(val.substr(0, 8))) << 32) |
                           detail::parse_hex(val.substr(8, 8));
        else if (key == "jitter")
            m.jitter = std::atoi(std::string(val).c_str());
        else if (key == "lane")
            m.lane = std::atoi(std::string(val).c_str());
        else if (key == "in") {
            std::size_t start = 0;
            while (start <= val.size()) {
                std::size_t semi = val.find(';', start);
                if (semi == std::string_view::npos)
                    semi = val.size();
                const std::string_view inst = val.substr(start, semi - start);
                std::vector<std::uint32_t> patterns;
                patterns.reserve(inst.size() / static_cast<std::size_t>(digits));
                for (std::size_t i = 0; i + digits <= inst.size();
                     i += static_cast<std::size_t>(digits))
                    patterns.push_back(detail::parse_hex(inst.substr(i, digits)));
                m.inputs.push_back(std::move(patterns));
                start = semi + 1;
            }
        } else if (key == "gt") {
            std::size_t start = 0;
            while (start < val.size()) {
                std::size_t semi = val.find(';', start);
                if (semi == std::string_view::npos)
                    semi = val.size();
                const std::string_view out = val.substr(start, semi - start);
                if (out.size() != 26)
                    throw FormatError("malformed ground-truth digest");
                m.gt.push_back({detail::parse_hex(out.substr(0, 8)),
                                detail::parse_hex(out.substr(9, 8)),
                                detail::parse_hex(out.substr(18, 8))});
                start = semi + 1;
            }
        }
        // Unknown keys are ignored for forward compatibility.
    }
    return m;
}

/// Decoded input element (pattern -> real) for hypothesis computation.
inline double decode_input(std::uint32_t pattern, Dtype dtype) {
    if (dtype == Dtype::Fp16)
        return fp16::decode(static_cast<fp16::half_t>(pattern));
    return static_cast<double>(static_cast<std::int8_t>(static_cast<std::uint8_t>(pattern)));
}

// --- input distributions ---

enum class InputDist { Uniform, Fixed, Lane, RotateLanes };

inline const char *to_string(InputDist d) {
    switch (d) {
    case InputDist::Uniform: return "uniform";
    case InputDist::Fixed: return "fixed";
    case InputDist::Lane: return "lane";
    case InputDist::RotateLanes: return "rotate";
    }
    return "?";
}

struct InputConfig {
    InputDist dist = InputDist::Uniform;
    double lo = -1.0; // fp16 draw range
    double hi = 1.0;
    int active_lane = 0; // InputDist::Lane
};

/// Campaign directive for the chosen-input attack: force zeros into the
/// three inactive lanes so every partial sum depends on one weight.
inline InputConfig chosen_input_config(int active_lane, Dtype dtype) {
    if (dtype != Dtype::Int8)
        throw UsageError("chosen-input masking targets int8 layers");
    if (active_lane < 0 || active_lane > 3)
        throw UsageError("active lane must be 0..3");
    InputConfig cfg;
    cfg.dist = InputDist::Lane;
    cfg.active_lane = active_lane;
    return cfg;
}

namespace detail {

/// Lane occupied by each input element of schedule instance 0 (from the
/// accumulate steps); -1 for elements never consumed.
inline std::vector<int> lane_of_input(const LayerSchedule &sched) {
    std::vector<int> lanes(static_cast<std::size_t>(sched.in_channels) * sched.in_height *
                               sched.in_width,
                           -1);
    for (const auto &st : sched.steps) {
        if (st.kind != StepKind::Accumulate || st.input_instance != 0)
            continue;
        for (int l = 0; l < 4; ++l)
            if (st.input_idx[l] >= 0)
                lanes[static_cast<std::size_t>(st.input_idx[l])] = l;
    }
    return lanes;
}

inline std::uint32_t draw_element(Rng &rng, Dtype dtype, const InputConfig &cfg) {
    if (dtype == Dtype::Fp16)
        return fp16::encode(rng.uniform(cfg.lo, cfg.hi));
    return static_cast<std::uint8_t>(static_cast<std::int8_t>(rng.uniform_int(-128, 127)));
}

inline std::uint32_t draw_nonzero_int8(Rng &rng) {
    std::int64_t v = rng.uniform_int(-128, 126);
    if (v >= 0)
        v += 1;
    return static_cast<std::uint8_t>(static_cast<std::int8_t>(v));
}

} // namespace detail

/// Draws the input patterns of one trace (all batch instances).
inline std::vector<std::vector<std::uint32_t>>
draw_inputs(const LayerSchedule &sched, const InputConfig &cfg, std::uint64_t trace_id,
            std::uint64_t master_seed, const std::vector<int> &lane_map) {
    const std::size_t n_el = lane_map.size();
    std::vector<std::vector<std::uint32_t>> out;
    out.reserve(static_cast<std::size_t>(sched.batch));

    const bool fixed = (cfg.dist == InputDist::Fixed);
    Rng rng(fixed ? derive_seed(master_seed, 0, seed_salt::kFixedInputs)
                  : derive_seed(master_seed, trace_id, seed_salt::kInputs));

    int active = cfg.active_lane;
    if (cfg.dist == InputDist::RotateLanes)
        active = static_cast<int>(trace_id % 4);

    for (int inst = 0; inst < sched.batch; ++inst) {
        std::vector<std::uint32_t> v(n_el, 0);
        for (std::size_t i = 0; i < n_el; ++i) {
            switch (cfg.dist) {
            case InputDist::Uniform:
            case InputDist::Fixed:
                v[i] = detail::draw_element(rng, sched.dtype, cfg);
                break;
            case InputDist::Lane:
            case InputDist::RotateLanes:
                if (lane_map[i] == active)
                    v[i] = detail::draw_nonzero_int8(rng);
                else
                    v[i] = 0;
                break;
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

inline InputMap to_input_map(const LayerSchedule &sched, std::span<const std::uint32_t> patterns) {
    InputMap m;
    m.channels = sched.in_channels;
    m.height = sched.in_height;
    m.width = sched.in_width;
    m.values.reserve(patterns.size());
    for (std::uint32_t p : patterns)
        m.values.push_back(decode_input(p, sched.dtype));
    return m;
}

// --- campaign runners ---

struct CampaignConfig {
    LeakageSpec leakage;
    InputConfig input;
    std::uint64_t master_seed = 1;
    std::size_t n_traces = 0;
    StepRange capture = StepRange::all();
    int workers = 0;
};

/// Simulates n independent inferences with fresh known inputs and appends
/// them to the sink in trace-id order.
inline void run_attack_campaign(const LayerSchedule &sched, const LayerParams &params,
                                const CampaignConfig &cfg, TraceSink &sink) {
    cfg.leakage.validate();
    if (cfg.n_traces < 1)
        throw UsageError("campaign needs at least one trace");
    const auto lane_map = detail::lane_of_input(sched);
    const int workers = resolve_workers(cfg.workers);

    const std::size_t batch_sz = 256;
    std::vector<std::vector<float>> samples(batch_sz);
    std::vector<std::string> metas(batch_sz);

    for (std::size_t first = 0; first < cfg.n_traces; first += batch_sz) {
        const std::size_t count = std::min(batch_sz, cfg.n_traces - first);
        parallel_for_blocks(count, workers, [&](std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) {
                const std::uint64_t id = first + k;
                TraceMeta m;
                m.id = id;
                m.input_seed = derive_seed(cfg.master_seed, id, seed_salt::kInputs);
                m.lane = cfg.input.dist == InputDist::Lane ? cfg.input.active_lane
                         : cfg.input.dist == InputDist::RotateLanes
                             ? static_cast<int>(id % 4)
                             : -1;
                m.inputs = draw_inputs(sched, cfg.input, id, cfg.master_seed, lane_map);

                std::vector<InputMap> maps;
                maps.reserve(m.inputs.size());
                for (const auto &pat : m.inputs)
                    maps.push_back(to_input_map(sched, pat));
                const IntermediateSequence seq =
                    execute_schedule(sched, params, maps, cfg.capture);
                if (!seq.outputs.empty()) {
                    m.gt.reserve(seq.outputs.size());
                    for (const auto &o : seq.outputs)
                        m.gt.push_back({o.c_sum_bits, o.c_out_bits, o.c_f_bits});
                }

                Trace t = synthesize_trace(seq, cfg.leakage,
                                           derive_seed(cfg.master_seed, id, seed_salt::kNoise));
                m.jitter = t.applied_jitter;
                samples[k] = std::move(t.samples);
                metas[k] = format_meta(m, sched.dtype);
            }
        });
        for (std::size_t k = 0; k < count; ++k)
            sink.append(samples[k], std::move(metas[k]));
    }
}

/// Fixed-vs-random TVLA pair. The fixed group pins the target parameter to
/// fixed_value with all other parameters zero and one frozen input map; the
/// random group redraws only the target parameter per trace.
struct TvlaTarget {
    bool is_bias = false;
    int order_index = 0; // weight index in schedule consumption order (0-based)
};

struct TvlaCampaignConfig {
    LeakageSpec leakage;
    InputConfig input;       // distribution used to draw the frozen map
    double weight_lo = -5.0; // random-group draw range (fp16)
    double weight_hi = 5.0;
    std::uint64_t master_seed = 1;
    std::size_t n_per_group = 0;
    int workers = 0;
};

/// Generates one TVLA group. A fixed group pins the target to *fixed_value;
/// a random group (fixed_value == nullopt) redraws the target per trace.
/// group_tag separates the groups' noise streams; 0 and 1 are the canonical
/// fixed/random tags of a pair.
inline void run_tvla_group(const LayerSchedule &sched, const TvlaTarget &target,
                           std::optional<double> fixed_value, const TvlaCampaignConfig &cfg,
                           TraceSink &sink, unsigned group_tag) {
    cfg.leakage.validate();
    if (!target.is_bias &&
        (target.order_index < 0 || target.order_index >= static_cast<int>(sched.order.size())))
        throw UsageError("TVLA target weight index out of range");
    if (target.is_bias && !sched.has_bias)
        throw UsageError("TVLA bias target on a schedule without bias");

    const auto lane_map = detail::lane_of_input(sched);
    InputConfig frozen = cfg.input;
    frozen.dist = InputDist::Fixed;

    const CandidateSpace space = sched.dtype == Dtype::Fp16
                                     ? enumerate_fp16_candidates(cfg.weight_lo, cfg.weight_hi)
                                     : enumerate_int8_candidates();

    const int workers = resolve_workers(cfg.workers);
    const std::size_t batch_sz = 256;
    std::vector<std::vector<float>> samples(batch_sz);
    std::vector<std::string> metas(batch_sz);

    for (std::size_t first = 0; first < cfg.n_per_group; first += batch_sz) {
        const std::size_t count = std::min(batch_sz, cfg.n_per_group - first);
        parallel_for_blocks(count, workers, [&](std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) {
                const std::uint64_t id = first + k;
                double value;
                if (fixed_value) {
                    value = *fixed_value;
                } else {
                    Rng trng(derive_seed(cfg.master_seed, id,
                                         seed_salt::kTvlaTarget +
                                             7919 * (target.is_bias ? 1u : 0u)));
                    const std::size_t ci = static_cast<std::size_t>(
                        trng.uniform_int(0, static_cast<std::int64_t>(space.count()) - 1));
                    value = space.value_at(ci);
                }

                LayerParams params;
                params.weights.assign(static_cast<std::size_t>(sched.n_weights), 0.0);
                if (sched.has_bias)
                    params.bias = 0.0;
                if (target.is_bias)
                    params.bias = value;
                else
                    params.weights[static_cast<std::size_t>(
                        sched.order[static_cast<std::size_t>(target.order_index)].weight)] =
                        value;

                TraceMeta m;
                m.id = id;
                m.input_seed = derive_seed(cfg.master_seed, 0, seed_salt::kFixedInputs);
                m.inputs = draw_inputs(sched, frozen, id, cfg.master_seed, lane_map);

                std::vector<InputMap> maps;
                for (const auto &pat : m.inputs)
                    maps.push_back(to_input_map(sched, pat));
                const IntermediateSequence seq = execute_schedule(sched, params, maps);
                for (const auto &o : seq.outputs)
                    m.gt.push_back({o.c_sum_bits, o.c_out_bits, o.c_f_bits});

                Trace t = synthesize_trace(
                    seq, cfg.leakage,
                    derive_seed(cfg.master_seed, id,
                                seed_salt::kNoise +
                                    131 * static_cast<std::uint64_t>(group_tag + 1)));
                m.jitter = t.applied_jitter;
                samples[k] = std::move(t.samples);
                metas[k] = format_meta(m, sched.dtype);
            }
        });
        for (std::size_t k = 0; k < count; ++k)
            sink.append(samples[k], std::move(metas[k]));
    }
}

inline void run_tvla_campaign(const LayerSchedule &sched, const TvlaTarget &target,
                              double fixed_value, const TvlaCampaignConfig &cfg,
                              TraceSink &fixed_sink, TraceSink &random_sink) {
    run_tvla_group(sched, target, fixed_value, cfg, fixed_sink, 0);
    run_tvla_group(sched, target, std::nullopt, cfg, random_sink, 1);
}

} // namespace scakit
