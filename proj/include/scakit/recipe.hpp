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

// Builders from configuration files to domain objects. The key schema is
// documented in the README; campaigns and attack recipes share the layer and
// leakage blocks.

#pragma once

#include <optional>
#include <string>

#include "scakit/attack.hpp"
#include "scakit/config.hpp"
#include "scakit/simulate.hpp"

namespace scakit {

inline Dtype parse_dtype(const std::string &s) {
    if (s == "fp16")
        return Dtype::Fp16;
    if (s == "int8")
        return Dtype::Int8;
    throw ConfigError("unknown dtype: " + s + " (expected fp16 or int8)");
}

inline LeakModel parse_leak_model(const std::string &s) {
    if (s == "hw")
        return LeakModel::HW;
    if (s == "hd")
        return LeakModel::HD;
    throw ConfigError("unknown leakage model: " + s + " (expected hw or hd)");
}

inline BiasModel parse_bias_model(const std::string &s) {
    if (s == "hw_cout")
        return BiasModel::HwCout;
    if (s == "hw_cf")
        return BiasModel::HwCf;
    if (s == "hd_csum_cout")
        return BiasModel::HdCsumCout;
    throw ConfigError("unknown bias model: " + s);
}

inline InputDist parse_input_dist(const std::string &s) {
    if (s == "uniform")
        return InputDist::Uniform;
    if (s == "fixed")
        return InputDist::Fixed;
    if (s == "lane")
        return InputDist::Lane;
    if (s == "rotate")
        return InputDist::RotateLanes;
    throw ConfigError("unknown input distribution: " + s);
}

struct LayerRecipe {
    std::string kind; // "conv" | "dense"
    LayerSchedule schedule;
    LayerParams params; // weights empty for attack recipes (secret)
};

/// Layer block shared by campaigns (with weights) and attack recipes
/// (architecture only). `with_weights` controls whether weights.* is read.
inline LayerRecipe build_layer(const Config &cfg, bool with_weights, std::uint64_t master_seed) {
    LayerRecipe lr;
    lr.kind = cfg.get_string("layer.kind", "conv");
    const int batch = static_cast<int>(cfg.get_i64("layer.batch", 1));

    if (lr.kind == "conv") {
        KernelSpec k;
        k.p = static_cast<int>(cfg.get_i64("layer.p"));
        k.q = static_cast<int>(cfg.get_i64("layer.q"));
        k.in_channels = static_cast<int>(cfg.get_i64("layer.channels", 1));
        k.dtype = parse_dtype(cfg.get_string("layer.dtype"));
        k.relu = cfg.get_bool("layer.relu", true);

        const bool has_bias = cfg.has("bias") || cfg.get_bool("layer.bias_present", false);
        if (with_weights) {
            const std::string source = cfg.get_string("weights.source", "list");
            if (source == "list") {
                k.weights = cfg.get_f64_list("weights.values");
            } else if (source == "seeded") {
                const std::uint64_t ws =
                    derive_seed(cfg.get_u64("weights.seed", master_seed), 0, seed_salt::kWeights);
                Rng rng(ws);
                k.weights.resize(static_cast<std::size_t>(k.weight_count()));
                if (k.dtype == Dtype::Fp16) {
                    const double lo = cfg.get_f64("weights.lo", -1.0);
                    const double hi = cfg.get_f64("weights.hi", 1.0);
                    for (auto &w : k.weights)
                        w = fp16::decode(fp16::encode(rng.uniform(lo, hi)));
                } else {
                    for (auto &w : k.weights)
                        w = static_cast<double>(rng.uniform_int(-128, 127));
                }
            } else {
                throw ConfigError("unknown weights.source: " + source);
            }
            if (cfg.has("bias"))
                k.bias = cfg.get_f64("bias");
        } else {
            k.weights.assign(static_cast<std::size_t>(k.weight_count()), 0.0);
            if (has_bias)
                k.bias = 0.0;
        }
        lr.schedule = build_conv_schedule(k, batch, cfg.get_bool("layer.pack_pairs", false));
        lr.params = {k.weights, k.bias};
        if (!with_weights)
            lr.params = {};
    } else if (lr.kind == "dense") {
        const int nodes = static_cast<int>(cfg.get_i64("layer.nodes"));
        const int input_size = static_cast<int>(cfg.get_i64("layer.input_size"));
        lr.schedule = build_dense_schedule(nodes, input_size, batch);
        if (with_weights) {
            DenseSpec d;
            d.nodes = nodes;
            d.input_size = input_size;
            const std::string source = cfg.get_string("weights.source", "seeded");
            if (source == "list") {
                d.weights = cfg.get_f64_list("weights.values");
            } else {
                const std::uint64_t ws =
                    derive_seed(cfg.get_u64("weights.seed", master_seed), 0, seed_salt::kWeights);
                Rng rng(ws);
                d.weights.resize(static_cast<std::size_t>(d.weight_count()));
                for (auto &w : d.weights)
                    w = static_cast<double>(rng.uniform_int(-128, 127));
            }
            d.validate();
            lr.params = {d.weights, std::nullopt};
        }
    } else {
        throw ConfigError("unknown layer.kind: " + lr.kind);
    }
    return lr;
}

inline LeakageSpec build_leakage(const Config &cfg) {
    LeakageSpec spec;
    spec.model = parse_leak_model(cfg.get_string("leak.model", "hw"));
    spec.scale = cfg.get_f64("leak.scale", 1.0);
    spec.noise_sigma = cfg.get_f64("leak.noise_sigma", 0.0);
    spec.samples_per_step = static_cast<int>(cfg.get_i64("leak.samples_per_step", 10));
    spec.leak_offset = static_cast<int>(cfg.get_i64("leak.leak_offset", 4));
    spec.jitter_max = static_cast<int>(cfg.get_i64("leak.jitter_max", 0));
    spec.baseline = cfg.get_f64("leak.baseline", 0.0);
    spec.validate();
    return spec;
}

inline InputConfig build_input(const Config &cfg) {
    InputConfig in;
    in.dist = parse_input_dist(cfg.get_string("input.dist", "uniform"));
    in.lo = cfg.get_f64("input.lo", -1.0);
    in.hi = cfg.get_f64("input.hi", 1.0);
    in.active_lane = static_cast<int>(cfg.get_i64("input.active_lane", 0));
    return in;
}

inline StepRange build_capture(const Config &cfg, std::size_t n_steps) {
    StepRange r;
    r.first = cfg.get_u64("capture.first", 0);
    r.last = cfg.get_u64("capture.last", n_steps);
    return r;
}

} // namespace scakit
