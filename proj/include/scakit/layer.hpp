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

// Layer descriptions: a single kernel application of a convolutional layer
// (the p x q window the accumulator chain computes) and a dense layer.

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "scakit/candidates.hpp"
#include "scakit/errors.hpp"
#include "scakit/half.hpp"

namespace scakit {

/// One p x q kernel with its weights and optional bias. Weights are stored
/// (channel, row, col)-major; the schedule decides consumption order.
struct KernelSpec {
    int p = 0; // kernel height
    int q = 0; // kernel width
    int in_channels = 1;
    Dtype dtype = Dtype::Fp16;
    std::vector<double> weights;
    std::optional<double> bias;
    bool relu = true;

    int weight_count() const { return p * q * in_channels; }

    int weight_index(int ch, int row, int col) const { return (ch * p + row) * q + col; }

    void validate() const {
        if (p < 1 || q < 1 || in_channels < 1)
            throw UsageError("kernel dimensions must be positive");
        if (static_cast<int>(weights.size()) != weight_count())
            throw UsageError("kernel expects " + std::to_string(weight_count()) +
                             " weights, got " + std::to_string(weights.size()));
        for (double w : weights)
            validate_param(w, dtype, "weight");
        if (bias) {
            if (dtype == Dtype::Int8) {
                // INT8 models carry an FP32 bias; any finite real is valid.
                if (!std::isfinite(*bias))
                    throw UsageError("bias must be finite");
            } else {
                validate_param(*bias, dtype, "bias");
            }
        }
    }

    static void validate_param(double v, Dtype dtype, const char *what) {
        if (dtype == Dtype::Fp16) {
            if (!std::isfinite(v) || std::fabs(v) > 65504.0)
                throw UsageError(std::string(what) + " outside the finite binary16 range");
        } else {
            if (v != std::floor(v) || v < -128.0 || v > 127.0)
                throw UsageError(std::string(what) + " is not a signed 8-bit integer");
        }
    }
};

/// A dense layer: `nodes` weighted sums over a shared input vector.
/// Weights are stored node-major: weight_index(node, i) = node*input_size+i.
struct DenseSpec {
    int nodes = 0;
    int input_size = 0;
    std::vector<double> weights; // nodes * input_size, int8 values

    int weight_count() const { return nodes * input_size; }

    void validate() const {
        if (nodes < 1 || input_size < 1)
            throw UsageError("dense layer dimensions must be positive");
        if (static_cast<int>(weights.size()) != weight_count())
            throw UsageError("dense layer expects " + std::to_string(weight_count()) +
                             " weights, got " + std::to_string(weights.size()));
        for (double w : weights)
            KernelSpec::validate_param(w, Dtype::Int8, "weight");
    }
};

/// An input feature-map window, (channel, row, col)-major. Dense layers use
/// shape (1, 1, input_size).
struct InputMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values;

    int size() const { return channels * height * width; }
    int index(int ch, int row, int col) const { return (ch * height + row) * width + col; }
    double at(int ch, int row, int col) const { return values[index(ch, row, col)]; }

    void validate() const {
        if (channels < 1 || height < 1 || width < 1)
            throw UsageError("input shape must be positive");
        if (static_cast<int>(values.size()) != size())
            throw UsageError("input map size does not match its shape");
    }
};

/// The weight/bias bundle execution consumes; builders derive it from
/// KernelSpec / DenseSpec.
struct LayerParams {
    std::vector<double> weights;
    std::optional<double> bias;
};

} // namespace scakit
