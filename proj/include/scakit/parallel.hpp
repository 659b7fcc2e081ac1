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

// Deterministic data parallelism: ranges are split into fixed contiguous
// blocks so results never depend on the worker count. Every parallel site in
// the toolkit writes to disjoint output cells; reductions happen afterwards
// in canonical index order on the calling thread.

#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace scakit {

/// Worker count resolution: explicit request > SCAKIT_WORKERS > hardware.
inline int resolve_workers(int requested = 0) {
    if (requested > 0)
        return requested;
    if (const char *env = std::getenv("SCAKIT_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0)
            return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs fn(begin, end) over a static contiguous partition of [0, n) on
/// `workers` threads. fn must write only to cells owned by its range.
template <typename Fn>
void parallel_for_blocks(std::size_t n, int workers, Fn &&fn) {
    if (n == 0)
        return;
    const std::size_t nw = static_cast<std::size_t>(workers) < n
                               ? static_cast<std::size_t>(workers > 0 ? workers : 1)
                               : n;
    if (nw <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(nw);
    std::vector<std::exception_ptr> errors(nw);
    const std::size_t chunk = (n + nw - 1) / nw;
    for (std::size_t w = 0; w < nw; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = begin + chunk < n ? begin + chunk : n;
        if (begin >= end)
            break;
        threads.emplace_back([&fn, &errors, w, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto &t : threads)
        t.join();
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace scakit
