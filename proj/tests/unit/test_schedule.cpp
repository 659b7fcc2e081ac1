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

#include <map>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "scakit/schedule.hpp"

using namespace scakit;

namespace {

KernelSpec conv_kernel(Dtype dtype, int p, int q, int ch, bool bias, bool relu = true) {
    KernelSpec k;
    k.p = p;
    k.q = q;
    k.in_channels = ch;
    k.dtype = dtype;
    k.relu = relu;
    k.weights.assign(static_cast<std::size_t>(p * q * ch), dtype == Dtype::Fp16 ? 0.25 : 3.0);
    if (bias)
        k.bias = dtype == Dtype::Fp16 ? 0.5 : 7.0;
    return k;
}

int count_kind(const LayerSchedule &s, StepKind k) {
    int n = 0;
    for (const auto &st : s.steps)
        n += st.kind == k;
    return n;
}

} // namespace

TEST_CASE("fp16 3x3 single-channel layout", "[schedule]") {
    const LayerSchedule s = build_conv_schedule(conv_kernel(Dtype::Fp16, 3, 3, 1, true));
    REQUIRE(count_kind(s, StepKind::Init) == 1);
    REQUIRE(count_kind(s, StepKind::Accumulate) == 9);
    REQUIRE(count_kind(s, StepKind::Combine) == 1);
    REQUIRE(count_kind(s, StepKind::BiasAdd) == 1);
    REQUIRE(count_kind(s, StepKind::Relu) == 1);
    for (const auto &st : s.steps)
        if (st.kind == StepKind::Accumulate) {
            REQUIRE(st.weight_idx[0] >= 0);
            REQUIRE(st.weight_idx[1] == -1); // lane 1 idle on single-channel
        }
    REQUIRE(s.order.size() == 9);
    // Epilogue ordering: combine before bias_add before relu.
    int combine = -1, bias = -1, relu = -1;
    for (std::size_t i = 0; i < s.steps.size(); ++i) {
        if (s.steps[i].kind == StepKind::Combine)
            combine = static_cast<int>(i);
        if (s.steps[i].kind == StepKind::BiasAdd)
            bias = static_cast<int>(i);
        if (s.steps[i].kind == StepKind::Relu)
            relu = static_cast<int>(i);
    }
    REQUIRE(combine < bias);
    REQUIRE(bias < relu);
}

TEST_CASE("fp16 even/odd channels map to lanes 0/1", "[schedule]") {
    const LayerSchedule s = build_conv_schedule(conv_kernel(Dtype::Fp16, 2, 2, 2, false));
    REQUIRE(count_kind(s, StepKind::Accumulate) == 4);
    KernelSpec k = conv_kernel(Dtype::Fp16, 2, 2, 2, false);
    for (const auto &st : s.steps) {
        if (st.kind != StepKind::Accumulate)
            continue;
        // lane 0 carries channel 0, lane 1 channel 1, same (row, col)
        REQUIRE(st.weight_idx[0] / (k.p * k.q) == 0);
        REQUIRE(st.weight_idx[1] / (k.p * k.q) == 1);
        REQUIRE(st.weight_idx[0] % (k.p * k.q) == st.weight_idx[1] % (k.p * k.q));
    }
}

TEST_CASE("int8 3x3 with 3 channels: one point per step, lane 3 idle", "[schedule]") {
    const LayerSchedule s = build_conv_schedule(conv_kernel(Dtype::Int8, 3, 3, 3, false));
    REQUIRE(count_kind(s, StepKind::Accumulate) == 9);
    for (const auto &st : s.steps) {
        if (st.kind != StepKind::Accumulate)
            continue;
        REQUIRE(st.weight_idx[0] >= 0);
        REQUIRE(st.weight_idx[1] >= 0);
        REQUIRE(st.weight_idx[2] >= 0);
        REQUIRE(st.weight_idx[3] == -1); // unused lane is zero
    }
    REQUIRE(s.order.size() == 27);
}

TEST_CASE("int8 single-channel pack_pairs packs two points per step", "[schedule]") {
    const LayerSchedule s =
        build_conv_schedule(conv_kernel(Dtype::Int8, 3, 3, 1, false), 1, /*pack_pairs=*/true);
    REQUIRE(count_kind(s, StepKind::Accumulate) == 5); // ceil(9/2)
    int full = 0, half = 0;
    for (const auto &st : s.steps) {
        if (st.kind != StepKind::Accumulate)
            continue;
        if (st.weight_idx[1] >= 0)
            ++full;
        else
            ++half;
        REQUIRE(st.weight_idx[2] == -1);
        REQUIRE(st.weight_idx[3] == -1);
    }
    REQUIRE(full == 4);
    REQUIRE(half == 1);
    // With one of the two lanes masked to zero input, each step's partial sum
    // depends on exactly one weight; structurally each lane holds one weight.
    REQUIRE(s.order.size() == 9);
    REQUIRE_THROWS_AS(
        build_conv_schedule(conv_kernel(Dtype::Fp16, 3, 3, 1, false), 1, true), UsageError);
}

TEST_CASE("int8 without bias or relu has no epilogue steps", "[schedule]") {
    const LayerSchedule s =
        build_conv_schedule(conv_kernel(Dtype::Int8, 3, 3, 1, false, /*relu=*/false));
    REQUIRE(count_kind(s, StepKind::Combine) == 0);
    REQUIRE(count_kind(s, StepKind::BiasAdd) == 0);
    REQUIRE(count_kind(s, StepKind::Relu) == 0);
}

TEST_CASE("dense schedule shapes", "[schedule]") {
    SECTION("512 nodes, 784 inputs: 196 steps per node") {
        const LayerSchedule s = build_dense_schedule(512, 784);
        REQUIRE(s.n_outputs == 512);
        REQUIRE(count_kind(s, StepKind::Init) == 512);
        REQUIRE(count_kind(s, StepKind::Accumulate) == 512 * 196);
        // Node-major: the first node's steps precede the second init.
        REQUIRE(s.steps[0].kind == StepKind::Init);
        for (int i = 1; i <= 196; ++i)
            REQUIRE(s.steps[static_cast<std::size_t>(i)].kind == StepKind::Accumulate);
        REQUIRE(s.steps[197].kind == StepKind::Init);
    }
    SECTION("1 node, 4 inputs: a single full step") {
        const LayerSchedule s = build_dense_schedule(1, 4);
        REQUIRE(count_kind(s, StepKind::Accumulate) == 1);
        REQUIRE(s.steps[1].weight_idx[3] == 3);
    }
    SECTION("1 node, 5 inputs: second step has three idle lanes") {
        const LayerSchedule s = build_dense_schedule(1, 5);
        REQUIRE(count_kind(s, StepKind::Accumulate) == 2);
        const Step &last = s.steps.back();
        REQUIRE(last.weight_idx[0] == 4);
        REQUIRE(last.weight_idx[1] == -1);
        REQUIRE(last.weight_idx[2] == -1);
        REQUIRE(last.weight_idx[3] == -1);
    }
}

TEST_CASE("schedule invariants: coverage, init-first, bias-before-relu", "[schedule]") {
    const LayerSchedule scheds[] = {
        build_conv_schedule(conv_kernel(Dtype::Fp16, 3, 3, 2, true), 2),
        build_conv_schedule(conv_kernel(Dtype::Int8, 2, 3, 5, true), 1),
        build_dense_schedule(3, 10, 2),
    };
    for (const auto &s : scheds) {
        // every weight appears in at least one accumulate step (instance 0)
        std::set<int> seen;
        std::map<int, bool> init_seen;
        for (const auto &st : s.steps) {
            if (st.kind == StepKind::Init)
                init_seen[st.accumulator_id] = true;
            if (st.kind == StepKind::Accumulate) {
                REQUIRE(init_seen[st.accumulator_id]);
                for (int l = 0; l < 4; ++l)
                    if (st.weight_idx[l] >= 0 && st.input_instance == 0)
                        seen.insert(st.weight_idx[l]);
            }
        }
        REQUIRE(static_cast<int>(seen.size()) == s.n_weights);
        // order covers each weight exactly once
        std::set<int> order_w;
        for (const auto &e : s.order)
            order_w.insert(e.weight);
        REQUIRE(static_cast<int>(order_w.size()) == s.n_weights);
    }
}

TEST_CASE("batch replicates the schedule over distinct instances", "[schedule]") {
    const LayerSchedule s1 = build_conv_schedule(conv_kernel(Dtype::Fp16, 2, 2, 1, true), 1);
    const LayerSchedule s3 = build_conv_schedule(conv_kernel(Dtype::Fp16, 2, 2, 1, true), 3);
    REQUIRE(s3.steps.size() == 3 * s1.steps.size());
    for (std::size_t i = 0; i < s1.steps.size(); ++i)
        for (int inst = 0; inst < 3; ++inst) {
            const Step &a = s1.steps[i];
            const Step &b = s3.steps[inst * s1.steps.size() + i];
            REQUIRE(a.kind == b.kind);
            REQUIRE(b.input_instance == inst);
            REQUIRE(a.weight_idx == b.weight_idx);
            REQUIRE(a.input_idx == b.input_idx);
        }
}

TEST_CASE("degenerate shapes are usage errors", "[schedule]") {
    REQUIRE_THROWS_AS(build_conv_schedule(conv_kernel(Dtype::Fp16, 0, 3, 1, false)), UsageError);
    REQUIRE_THROWS_AS(build_dense_schedule(0, 8), UsageError);
    REQUIRE_THROWS_AS(build_conv_schedule(conv_kernel(Dtype::Fp16, 3, 3, 1, false), 0),
                      UsageError);
    KernelSpec bad = conv_kernel(Dtype::Fp16, 3, 3, 1, false);
    bad.weights.pop_back();
    REQUIRE_THROWS_AS(build_conv_schedule(bad), UsageError);
    KernelSpec nonint = conv_kernel(Dtype::Int8, 2, 2, 1, false);
    nonint.weights[0] = 0.5;
    REQUIRE_THROWS_AS(build_conv_schedule(nonint), UsageError);
}
