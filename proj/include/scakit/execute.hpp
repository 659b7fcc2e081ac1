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

// Bit-exact execution of a layer schedule. Every step's register write is
// recorded as (value before, value after); these records are the leakage
// targets. Epilogue registers start at 0 and are overwritten in place, so
// the bias-add record is exactly the c_sum -> c_out register update.

#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "scakit/layer.hpp"
#include "scakit/leakage.hpp"
#include "scakit/schedule.hpp"
#include "scakit/word32.hpp"

namespace scakit {

struct StepRecord {
    std::uint32_t step_index = 0;
    std::int32_t accumulator_id = 0;
    std::uint32_t before = 0;
    std::uint32_t after = 0;
};

/// Leakage value of one register write under the given model. fp16 words
/// hold two 16-bit lanes whose weights sum to the full 32-bit popcount, so a
/// single 32-bit rule covers both dtypes.
inline int leak_value(const StepRecord &r, LeakModel model) {
    return model == LeakModel::HW ? hw32(r.after) : hd32(r.before, r.after);
}

struct OutputValues {
    std::uint32_t c_sum_bits = 0, c_out_bits = 0, c_f_bits = 0;
    double c_sum = 0.0, c_out = 0.0, c_f = 0.0;
};

struct IntermediateSequence {
    std::vector<StepRecord> records;
    std::vector<OutputValues> outputs; // per (instance * n_outputs + output)
    std::size_t schedule_steps = 0;    // total steps in the schedule
    std::size_t captured_first = 0;    // first recorded step index
};

/// Half-open range of schedule steps to record; a window compresses
/// acquisition to the region of interest, like a scope capture window.
struct StepRange {
    std::size_t first = 0;
    std::size_t last = static_cast<std::size_t>(-1);

    static StepRange all() { return {}; }
    bool is_all(std::size_t n) const { return first == 0 && last >= n; }
};

namespace detail {

inline std::int8_t to_int8(double v) { return static_cast<std::int8_t>(v); }

inline float relu_f32(float v) { return v > 0.0f ? v : 0.0f; }

} // namespace detail

/// Executes the schedule over one input map per batch instance. With a
/// capture window only the accumulator chains that reach the window are
/// computed; their values are identical to a full run because chains are
/// independent.
inline IntermediateSequence execute_schedule(const LayerSchedule &sched, const LayerParams &params,
                                             std::span<const InputMap> inputs,
                                             StepRange range = StepRange::all()) {
    if (static_cast<int>(inputs.size()) != sched.batch)
        throw UsageError("schedule expects one input map per batch instance");
    for (const auto &in : inputs)
        sched.check_input(in);
    if (static_cast<int>(params.weights.size()) != sched.n_weights)
        throw UsageError("parameter bundle does not match the schedule's weight count");
    if (sched.has_bias && !params.bias)
        throw UsageError("schedule has a bias step but no bias value was provided");

    const std::size_t n_steps = sched.steps.size();
    const std::size_t first = range.first < n_steps ? range.first : n_steps;
    const std::size_t last = range.last < n_steps ? range.last : n_steps;
    if (first > last)
        throw UsageError("invalid capture range");
    const bool full = (first == 0 && last == n_steps);

    // Pre-encoded operands.
    std::vector<fp16::half_t> w16, x16;
    std::vector<std::int8_t> w8, x8;
    if (sched.dtype == Dtype::Fp16) {
        w16.reserve(params.weights.size());
        for (double w : params.weights)
            w16.push_back(fp16::encode(w));
        x16.reserve(inputs.size() * inputs[0].values.size());
        for (const auto &in : inputs)
            for (double v : in.values)
                x16.push_back(fp16::encode(v));
    } else {
        w8.reserve(params.weights.size());
        for (double w : params.weights)
            w8.push_back(detail::to_int8(w));
        x8.reserve(inputs.size() * inputs[0].values.size());
        for (const auto &in : inputs)
            for (double v : in.values)
                x8.push_back(detail::to_int8(v));
    }
    const std::size_t in_stride = inputs[0].values.size();

    // Which accumulators are needed for the capture window. Epilogue
    // registers read the instance's main accumulator, so pull that in too.
    std::vector<char> needed;
    if (!full) {
        const int max_reg = sched.batch * sched.n_outputs + sched.batch;
        needed.assign(static_cast<std::size_t>(max_reg), 0);
        for (std::size_t i = first; i < last; ++i)
            needed[static_cast<std::size_t>(sched.steps[i].accumulator_id)] = 1;
        for (std::size_t i = 0; i < last; ++i) {
            const Step &st = sched.steps[i];
            if (st.kind == StepKind::Combine &&
                needed[static_cast<std::size_t>(st.accumulator_id)])
                needed[static_cast<std::size_t>(st.input_instance) * sched.n_outputs] = 1;
        }
    }

    std::vector<std::uint32_t> regs(static_cast<std::size_t>(sched.batch) * sched.n_outputs +
                                        sched.batch,
                                    0u);

    IntermediateSequence seq;
    seq.schedule_steps = n_steps;
    seq.captured_first = first;
    seq.records.reserve(last - first);
    if (full)
        seq.outputs.assign(static_cast<std::size_t>(sched.batch) * sched.n_outputs, {});

    const fp16::half_t bias16 =
        (sched.has_bias && sched.dtype == Dtype::Fp16) ? fp16::encode(*params.bias) : 0;
    const float bias32 =
        (sched.has_bias && sched.dtype == Dtype::Int8) ? static_cast<float>(*params.bias) : 0.0f;

    for (std::size_t i = 0; i < last; ++i) {
        const Step &st = sched.steps[i];
        const auto acc = static_cast<std::size_t>(st.accumulator_id);
        if (!full && !needed[acc])
            continue;

        const std::uint32_t before = regs[acc];
        std::uint32_t after = before;
        const std::size_t in_base = static_cast<std::size_t>(st.input_instance) * in_stride;

        switch (st.kind) {
        case StepKind::Init:
            after = 0;
            break;
        case StepKind::Accumulate:
            if (sched.dtype == Dtype::Fp16) {
                Word32 a, b;
                for (int l = 0; l < 2; ++l)
                    if (st.weight_idx[l] >= 0) {
                        a.set_half_lane(l, w16[static_cast<std::size_t>(st.weight_idx[l])]);
                        b.set_half_lane(l, x16[in_base + static_cast<std::size_t>(st.input_idx[l])]);
                    }
                after = hfma2(a, b, Word32{before}).bits;
            } else {
                Word32 a, b;
                for (int l = 0; l < 4; ++l)
                    if (st.weight_idx[l] >= 0) {
                        a.set_int8_lane(l, w8[static_cast<std::size_t>(st.weight_idx[l])]);
                        b.set_int8_lane(l, x8[in_base + static_cast<std::size_t>(st.input_idx[l])]);
                    }
                after = static_cast<std::uint32_t>(
                    idp4a(a, b, static_cast<std::int32_t>(before)));
            }
            break;
        case StepKind::Combine:
            if (sched.dtype == Dtype::Fp16) {
                // The accumulator of this instance holds the two lane sums.
                const Word32 a{regs[static_cast<std::size_t>(st.input_instance)]};
                after = fp16::add(a.half_lane(0), a.half_lane(1));
            } else {
                const auto sum = static_cast<std::int32_t>(
                    regs[static_cast<std::size_t>(st.input_instance)]);
                after = std::bit_cast<std::uint32_t>(static_cast<float>(sum));
            }
            break;
        case StepKind::BiasAdd:
            if (sched.dtype == Dtype::Fp16)
                after = fp16::add(static_cast<fp16::half_t>(before), bias16);
            else
                after = std::bit_cast<std::uint32_t>(std::bit_cast<float>(before) + bias32);
            break;
        case StepKind::Relu:
            if (sched.dtype == Dtype::Fp16)
                after = fp16::relu(static_cast<fp16::half_t>(before));
            else
                after = std::bit_cast<std::uint32_t>(detail::relu_f32(std::bit_cast<float>(before)));
            break;
        }

        regs[acc] = after;
        if (i >= first)
            seq.records.push_back({static_cast<std::uint32_t>(i), st.accumulator_id, before, after});
    }

    if (full) {
        // Fold final register states into per-output c_sum / c_out / c_f.
        for (int inst = 0; inst < sched.batch; ++inst)
            for (int out = 0; out < sched.n_outputs; ++out) {
                OutputValues &v = seq.outputs[static_cast<std::size_t>(inst) * sched.n_outputs + out];
                const std::uint32_t acc = regs[static_cast<std::size_t>(inst) * sched.n_outputs + out];
                if (sched.dtype == Dtype::Fp16) {
                    const Word32 w{acc};
                    const fp16::half_t csum = fp16::add(w.half_lane(0), w.half_lane(1));
                    fp16::half_t cout = csum;
                    if (sched.has_bias)
                        cout = fp16::add(csum, bias16);
                    fp16::half_t cf = cout;
                    if (sched.has_relu)
                        cf = fp16::relu(cout);
                    v.c_sum_bits = csum;
                    v.c_out_bits = cout;
                    v.c_f_bits = cf;
                    v.c_sum = fp16::decode(csum);
                    v.c_out = fp16::decode(cout);
                    v.c_f = fp16::decode(cf);
                } else {
                    const auto sum = static_cast<std::int32_t>(acc);
                    v.c_sum_bits = acc;
                    v.c_sum = static_cast<double>(sum);
                    if (sched.has_bias || sched.has_relu) {
                        float f = static_cast<float>(sum);
                        if (sched.has_bias)
                            f += bias32;
                        v.c_out_bits = std::bit_cast<std::uint32_t>(f);
                        v.c_out = static_cast<double>(f);
                        const float fr = sched.has_relu ? detail::relu_f32(f) : f;
                        v.c_f_bits = std::bit_cast<std::uint32_t>(fr);
                        v.c_f = static_cast<double>(fr);
                    } else {
                        v.c_out_bits = v.c_sum_bits;
                        v.c_out = v.c_sum;
                        v.c_f_bits = v.c_sum_bits;
                        v.c_f = v.c_sum;
                    }
                }
            }
    }
    return seq;
}

inline IntermediateSequence execute_schedule(const LayerSchedule &sched, const KernelSpec &kernel,
                                             std::span<const InputMap> inputs,
                                             StepRange range = StepRange::all()) {
    return execute_schedule(sched, LayerParams{kernel.weights, kernel.bias}, inputs, range);
}

/// Naive sequential partial sum s_j (Eq-style reference) in double
/// precision, following the schedule's consumption order. For a weight j
/// whose accumulator chain differs (dense layers), only same-chain terms
/// contribute. 1-based j.
inline double partial_sum_reference(const LayerSchedule &sched, std::span<const double> weights,
                                    const InputMap &input, int j) {
    if (j < 1 || j > static_cast<int>(sched.order.size()))
        throw UsageError("partial sum index out of range");
    const auto &target = sched.order[static_cast<std::size_t>(j - 1)];
    double s = 0.0;
    for (int i = 0; i < j; ++i) {
        const auto &ref = sched.order[static_cast<std::size_t>(i)];
        if (ref.accumulator_id != target.accumulator_id)
            continue;
        const auto &st = sched.steps[static_cast<std::size_t>(ref.step)];
        s += weights[static_cast<std::size_t>(ref.weight)] *
             input.values[static_cast<std::size_t>(st.input_idx[ref.lane])];
    }
    return s;
}

} // namespace scakit
