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

#include <catch2/catch_amalgamated.hpp>

#include "scakit/cema.hpp"
#include "scakit/rng.hpp"
#include "support/oracles.hpp"

using namespace scakit;

namespace {

/// Hypothesis whose values are fixed per (candidate, trace) by a seeded hash;
/// candidate 0 can be made to match a trace column exactly.
class TableHypothesis final : public HypothesisSource {
  public:
    TableHypothesis(std::vector<std::vector<std::uint8_t>> table) : table_(std::move(table)) {}

    std::size_t candidate_count() const override { return table_.size(); }
    void prepare(std::size_t first, std::size_t) override { first_ = first; }
    void fill(std::size_t c0, std::size_t c1, std::size_t count,
              std::uint8_t *out) const override {
        for (std::size_t c = c0; c < c1; ++c)
            for (std::size_t k = 0; k < count; ++k)
                out[(c - c0) * count + k] = table_[c][first_ + k];
    }

  private:
    std::vector<std::vector<std::uint8_t>> table_;
    std::size_t first_ = 0;
};

} // namespace

TEST_CASE("an exact hypothesis reaches r = 1 and rank 0", "[cema]") {
    const std::size_t n = 64;
    Rng rng(0xCE3A);
    std::vector<std::uint8_t> hidden(n);
    for (auto &v : hidden)
        v = static_cast<std::uint8_t>(rng.uniform_int(0, 16));

    MemTraceSet set(4);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> t(4, 0.0f);
        t[2] = static_cast<float>(hidden[i]); // noiseless leak at sample 2
        t[0] = static_cast<float>(rng.gaussian(0, 1));
        set.append(t, "id=" + std::to_string(i));
    }

    std::vector<std::vector<std::uint8_t>> table(2);
    table[0] = hidden; // candidate A: exact
    table[1].resize(n);
    for (auto &v : table[1])
        v = static_cast<std::uint8_t>(rng.uniform_int(0, 16)); // candidate B: junk
    TableHypothesis hyp(table);

    CemaConfig cfg;
    cfg.window_first = 0;
    cfg.window_last = 4;
    cfg.workers = 1;
    const CemaResult res = cema(set, hyp, cfg);
    REQUIRE(res.corr[0 * 4 + 2] == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(res.ranking[0] == 0);
    REQUIRE(res.best_sample[0] == 2);
    REQUIRE(key_rank(res, 0) == 0);
    REQUIRE(key_rank(res, 1) == 1);
    REQUIRE_THROWS_AS(key_rank(res, 7), UsageError);
}

TEST_CASE("chunked runs agree with sequential and repeat bit-identically", "[cema]") {
    const std::size_t n = 1000, K = 24, W = 6;
    Rng rng(0x0C44);
    std::vector<std::vector<std::uint8_t>> table(K, std::vector<std::uint8_t>(n));
    for (auto &row : table)
        for (auto &v : row)
            v = static_cast<std::uint8_t>(rng.uniform_int(0, 32));
    MemTraceSet set(W);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> t(W);
        for (std::size_t s = 0; s < W; ++s)
            t[s] = static_cast<float>(0.35 * table[s % K][i] + rng.gaussian(0, 2));
        set.append(t, "id=" + std::to_string(i));
    }

    auto run = [&](std::size_t chunk, int workers) {
        TableHypothesis hyp(table);
        CemaConfig cfg;
        cfg.window_first = 0;
        cfg.window_last = W;
        cfg.chunk_size = chunk;
        cfg.workers = workers;
        return cema(set, hyp, cfg);
    };

    const CemaResult seq = run(n, 1);
    const CemaResult ten = run(100, 1);
    for (std::size_t i = 0; i < K * W; ++i)
        REQUIRE(ten.corr[i] == Catch::Approx(seq.corr[i]).epsilon(1e-9).margin(1e-9));
    REQUIRE(ten.ranking == seq.ranking);

    // canonical fold repeats bit-identically, and workers don't matter
    const CemaResult again = run(100, 1);
    REQUIRE(again.corr == ten.corr);
    const CemaResult threaded = run(100, 3);
    REQUIRE(threaded.corr == ten.corr);
    REQUIRE(threaded.ranking == ten.ranking);
}

TEST_CASE("checkpoints snapshot prefix scores exactly", "[cema]") {
    const std::size_t n = 500, K = 8, W = 3;
    Rng rng(0xCB0);
    std::vector<std::vector<std::uint8_t>> table(K, std::vector<std::uint8_t>(n));
    for (auto &row : table)
        for (auto &v : row)
            v = static_cast<std::uint8_t>(rng.uniform_int(0, 16));
    MemTraceSet set(W);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> t(W);
        for (std::size_t s = 0; s < W; ++s)
            t[s] = static_cast<float>(table[(s + 1) % K][i] + rng.gaussian(0, 1));
        set.append(t, "id=" + std::to_string(i));
    }

    TableHypothesis hyp(table);
    CemaConfig cfg;
    cfg.window_first = 0;
    cfg.window_last = W;
    cfg.chunk_size = 128;
    cfg.checkpoints = {100, 250, 500};
    cfg.workers = 1;
    const CemaResult res = cema(set, hyp, cfg);
    REQUIRE(res.checkpoints.size() == 3); // 500 == n folds into the final snapshot
    REQUIRE(res.checkpoints.back().n_traces == n);

    // a fresh run truncated to 250 traces reproduces the 250-checkpoint
    std::vector<std::size_t> head(250);
    for (std::size_t i = 0; i < 250; ++i)
        head[i] = i;
    FilteredSource first250(set, head);
    TableHypothesis hyp2(table);
    CemaConfig cfg2 = cfg;
    cfg2.checkpoints = {};
    const CemaResult res250 = cema(first250, hyp2, cfg2);
    for (std::size_t c = 0; c < K; ++c)
        REQUIRE(res.checkpoints[1].scores[c] ==
                Catch::Approx(res250.best_abs[c]).epsilon(1e-12));
}

TEST_CASE("degenerate hypothesis and sample columns are flagged with r = 0", "[cema]") {
    const std::size_t n = 50;
    Rng rng(0xDE6);
    std::vector<std::vector<std::uint8_t>> table(2, std::vector<std::uint8_t>(n));
    for (auto &v : table[0])
        v = 7; // constant hypothesis: no discriminating power
    for (auto &v : table[1])
        v = static_cast<std::uint8_t>(rng.uniform_int(0, 16));

    MemTraceSet set(2);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> t(2);
        t[0] = 3.25f; // constant sample column
        t[1] = static_cast<float>(rng.gaussian(0, 1));
        set.append(t, "id=" + std::to_string(i));
    }
    TableHypothesis hyp(table);
    CemaConfig cfg;
    cfg.window_first = 0;
    cfg.window_last = 2;
    cfg.workers = 1;
    const CemaResult res = cema(set, hyp, cfg);
    REQUIRE(res.degenerate[0 * 2 + 0] == 1);
    REQUIRE(res.degenerate[0 * 2 + 1] == 1); // constant hypothesis row
    REQUIRE(res.degenerate[1 * 2 + 0] == 1); // constant sample column
    REQUIRE(res.degenerate[1 * 2 + 1] == 0);
    REQUIRE(res.corr[0] == 0.0);
    // rankings remain total
    REQUIRE(res.ranking.size() == 2);
}

TEST_CASE("ties rank by enumeration order", "[cema]") {
    std::vector<double> scores{0.5, 0.9, 0.5, 0.9};
    REQUIRE(key_rank_at(scores, 1) == 0);
    REQUIRE(key_rank_at(scores, 3) == 1);
    REQUIRE(key_rank_at(scores, 0) == 2);
    REQUIRE(key_rank_at(scores, 2) == 3);
}

TEST_CASE("log checkpoints are ascending and end at n", "[cema]") {
    const auto cps = log_checkpoints(100000);
    REQUIRE(cps.size() == 10);
    REQUIRE(cps.front() == 10);
    REQUIRE(cps.back() == 100000);
    for (std::size_t i = 1; i < cps.size(); ++i)
        REQUIRE(cps[i] > cps[i - 1]);
}

TEST_CASE("window and input validation", "[cema]") {
    MemTraceSet set(4);
    set.append(std::vector<float>(4, 0.0f), "id=0");
    set.append(std::vector<float>(4, 1.0f), "id=1");
    std::vector<std::vector<std::uint8_t>> table(1, std::vector<std::uint8_t>(2, 1));
    TableHypothesis hyp(table);
    CemaConfig cfg;
    cfg.window_first = 2;
    cfg.window_last = 2;
    REQUIRE_THROWS_AS(cema(set, hyp, cfg), UsageError);
    cfg.window_last = 5;
    REQUIRE_THROWS_AS(cema(set, hyp, cfg), UsageError);
    cfg.window_last = 4;
    cfg.chunk_size = 0;
    REQUIRE_THROWS_AS(cema(set, hyp, cfg), UsageError);
}
