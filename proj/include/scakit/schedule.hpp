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

// Step schedules describing how the reverse-engineered kernels walk a layer:
// a block of accumulator initialisation, a block of vectorised
// multiply-accumulate steps, and an epilogue that combines partial sums,
// adds the bias and applies ReLU. The schedule is the ground truth both the
// simulator and the attack hypotheses execute.
//
// Fixed choices (any fixed order is attack-equivalent since the attacker
// profiles the same schedule):
//  - accumulation order is row-major (row, col, channel group);
//  - fp16 assigns even input channels to lane 0, odd to lane 1, so a
//    single-channel layer only ever writes lane 0;
//  - int8 consumes up to four channels of one input point per step, unused
//    lanes zero; `pack_pairs` packs two consecutive points per step for
//    single-channel layers instead;
//  - dense layers run node-major, four inputs per step;
//  - batch b concatenates b copies of the batch=1 schedule over distinct
//    input instances.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "scakit/layer.hpp"

namespace scakit {

enum class StepKind : std::uint8_t { Init, Accumulate, Combine, BiasAdd, Relu };

inline const char *to_string(StepKind k) {
    switch (k) {
    case StepKind::Init: return "init";
    case StepKind::Accumulate: return "accumulate";
    case StepKind::Combine: return "combine";
    case StepKind::BiasAdd: return "bias_add";
    case StepKind::Relu: return "relu";
    }
    return "?";
}

struct Step {
    StepKind kind = StepKind::Init;
    std::int32_t accumulator_id = 0;
    std::int32_t input_instance = 0;
    // Per-lane weight/input storage indices, -1 for unused lanes.
    // fp16 uses lanes 0..1, int8 lanes 0..3.
    std::array<std::int32_t, 4> weight_idx{-1, -1, -1, -1};
    std::array<std::int32_t, 4> input_idx{-1, -1, -1, -1};
};

struct LayerSchedule {
    Dtype dtype = Dtype::Fp16;
    int batch = 1;
    int n_weights = 0;        // distinct layer weights (bias excluded)
    int n_outputs = 1;        // accumulator chains per batch instance
    bool has_bias = false;
    bool has_relu = false;
    int in_channels = 0, in_height = 0, in_width = 0;
    std::vector<Step> steps;

    /// Consumption order of the layer's weights in batch instance 0; entry j
    /// is the attack's w_{j+1}.
    struct WeightRef {
        std::int32_t step = 0;   // step index in `steps`
        std::int32_t lane = 0;
        std::int32_t weight = 0; // storage index
        std::int32_t accumulator_id = 0;
    };
    std::vector<WeightRef> order;

    std::size_t step_count() const { return steps.size(); }

    int lanes() const { return dtype == Dtype::Fp16 ? 2 : 4; }

    /// Epilogue registers live above the accumulator bank.
    int epilogue_reg(int instance) const { return batch * n_outputs + instance; }

    void check_input(const InputMap &in) const {
        in.validate();
        if (in.channels != in_channels || in.height != in_height || in.width != in_width)
            throw UsageError("input shape does not match the schedule");
    }
};

/// Builds the schedule of one kernel application (one output element) of a
/// convolutional layer, replicated `batch` times over distinct inputs.
inline LayerSchedule build_conv_schedule(const KernelSpec &kernel, int batch = 1,
                                         bool pack_pairs = false) {
    kernel.validate();
    if (batch < 1)
        throw UsageError("batch must be >= 1");
    if (pack_pairs && (kernel.dtype != Dtype::Int8 || kernel.in_channels != 1))
        throw UsageError("pack_pairs applies to single-channel int8 layers only");

    LayerSchedule s;
    s.dtype = kernel.dtype;
    s.batch = batch;
    s.n_weights = kernel.weight_count();
    s.n_outputs = 1;
    s.has_bias = kernel.bias.has_value();
    s.has_relu = kernel.relu;
    s.in_channels = kernel.in_channels;
    s.in_height = kernel.p;
    s.in_width = kernel.q;

    const int C = kernel.in_channels;
    for (int inst = 0; inst < batch; ++inst) {
        const int acc = inst;
        s.steps.push_back({StepKind::Init, acc, inst, {-1, -1, -1, -1}, {-1, -1, -1, -1}});

        auto emit = [&](const Step &st) {
            s.steps.push_back(st);
            if (inst == 0) {
                for (int l = 0; l < 4; ++l)
                    if (st.weight_idx[l] >= 0)
                        s.order.push_back({static_cast<std::int32_t>(s.steps.size() - 1), l,
                                           st.weight_idx[l], acc});
            }
        };

        if (kernel.dtype == Dtype::Fp16) {
            for (int r = 0; r < kernel.p; ++r)
                for (int c = 0; c < kernel.q; ++c)
                    for (int g = 0; g < (C + 1) / 2; ++g) {
                        Step st{StepKind::Accumulate, acc, inst, {-1, -1, -1, -1}, {-1, -1, -1, -1}};
                        const int ch0 = 2 * g, ch1 = 2 * g + 1;
                        st.weight_idx[0] = kernel.weight_index(ch0, r, c);
                        st.input_idx[0] = st.weight_idx[0];
                        if (ch1 < C) {
                            st.weight_idx[1] = kernel.weight_index(ch1, r, c);
                            st.input_idx[1] = st.weight_idx[1];
                        }
                        emit(st);
                    }
        } else if (!pack_pairs) {
            for (int r = 0; r < kernel.p; ++r)
                for (int c = 0; c < kernel.q; ++c)
                    for (int g = 0; g < (C + 3) / 4; ++g) {
                        Step st{StepKind::Accumulate, acc, inst, {-1, -1, -1, -1}, {-1, -1, -1, -1}};
                        for (int k = 0; k < 4 && 4 * g + k < C; ++k) {
                            st.weight_idx[k] = kernel.weight_index(4 * g + k, r, c);
                            st.input_idx[k] = st.weight_idx[k];
                        }
                        emit(st);
                    }
        } else {
            // Two consecutive input points per step (single channel).
            const int n_points = kernel.p * kernel.q;
            for (int t = 0; t < n_points; t += 2) {
                Step st{StepKind::Accumulate, acc, inst, {-1, -1, -1, -1}, {-1, -1, -1, -1}};
                for (int k = 0; k < 2 && t + k < n_points; ++k) {
                    st.weight_idx[k] = t + k;
                    st.input_idx[k] = t + k;
                }
                emit(st);
            }
        }

        // Epilogue. fp16 always combines its two lane sums; int8 converts to
        // floating point only when a bias or activation follows.
        const bool int8_epilogue = s.has_bias || s.has_relu;
        if (kernel.dtype == Dtype::Fp16 || int8_epilogue) {
            const int out_reg = batch * 1 + inst;
            s.steps.push_back({StepKind::Combine, out_reg, inst, {-1, -1, -1, -1}, {-1, -1, -1, -1}});
            if (s.has_bias)
                s.steps.push_back({StepKind::BiasAdd, out_reg, inst, {-1, -1, -1, -1}, {-1, -1, -1, -1}});
            if (s.has_relu)
                s.steps.push_back({StepKind::Relu, out_reg, inst, {-1, -1, -1, -1}, {-1, -1, -1, -1}});
        }
    }
    return s;
}

/// Builds a dense-layer schedule: per node, ceil(input_size/4) four-lane
/// steps in ascending input order; all nodes share the same inputs.
inline LayerSchedule build_dense_schedule(int nodes, int input_size, int batch = 1) {
    if (nodes < 1 || input_size < 1)
        throw UsageError("dense layer dimensions must be positive");
    if (batch < 1)
        throw UsageError("batch must be >= 1");

    LayerSchedule s;
    s.dtype = Dtype::Int8;
    s.batch = batch;
    s.n_weights = nodes * input_size;
    s.n_outputs = nodes;
    s.has_bias = false;
    s.has_relu = false;
    s.in_channels = 1;
    s.in_height = 1;
    s.in_width = input_size;

    for (int inst = 0; inst < batch; ++inst)
        for (int n = 0; n < nodes; ++n) {
            const int acc = inst * nodes + n;
            s.steps.push_back({StepKind::Init, acc, inst, {-1, -1, -1, -1}, {-1, -1, -1, -1}});
            for (int t = 0; t < input_size; t += 4) {
                Step st{StepKind::Accumulate, acc, inst, {-1, -1, -1, -1}, {-1, -1, -1, -1}};
                for (int k = 0; k < 4 && t + k < input_size; ++k) {
                    st.weight_idx[k] = n * input_size + t + k;
                    st.input_idx[k] = t + k;
                }
                s.steps.push_back(st);
                if (inst == 0)
                    for (int l = 0; l < 4; ++l)
                        if (st.weight_idx[l] >= 0)
                            s.order.push_back({static_cast<std::int32_t>(s.steps.size() - 1), l,
                                               st.weight_idx[l], acc});
            }
        }
    return s;
}

} // namespace scakit
