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

// The parameter-extraction pipeline: TVLA profiling locates where each
// parameter leaks, then weights are recovered one by one in schedule order
// (each hypothesis replays the accumulator prefix from the already-recovered
// weights and the trace's known inputs), and finally the bias from the
// c_sum -> c_out register update or the activation output.
//
// Traces whose inputs activate a not-yet-recovered weight cannot be
// predicted exactly and are filtered out; with chosen-input or rotating-lane
// campaigns this reduces each int8 partial sum to a single unknown weight.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scakit/cema.hpp"
#include "scakit/execute.hpp"
#include "scakit/simulate.hpp"
#include "scakit/stats.hpp"

namespace scakit {

// --- profiling ---

struct ParamLeak {
    bool profiled = false;
    std::vector<std::size_t> leak_samples;
    std::size_t window_first = 0, window_last = 0; // recommended attack window
    double peak_t = 0.0;
};

struct LeakMap {
    std::vector<ParamLeak> weights; // per schedule-order weight
    std::optional<ParamLeak> bias;
    int samples_per_step = 0;
    int leak_offset = 0;
    int jitter_pad = 0;
};

struct ProfileConfig {
    LeakageSpec leakage;
    InputConfig input;
    std::size_t n_per_group = 2000;
    // Welch's t sees mean shifts only, and one fixed value can land on the
    // random-group mean at a leaking sample; profiling unions the leak
    // points over several fixed values against a shared random group.
    // Empty: a dtype-appropriate default set.
    std::vector<double> fixed_values;
    double weight_lo = -5.0, weight_hi = 5.0;
    double threshold = 4.5;
    int margin = 2;
    std::uint64_t master_seed = 0x5ca1ab1e;
    int workers = 0;
};

namespace detail {

/// First contiguous run of leak samples, dilated by the margin.
inline void first_cluster_window(const std::vector<std::size_t> &pts, int margin,
                                 std::size_t trace_len, std::size_t &first, std::size_t &last) {
    first = pts.front();
    last = pts.front();
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i] == last + 1)
            last = pts[i];
        else
            break;
    }
    const auto m = static_cast<std::size_t>(margin);
    first = first > m ? first - m : 0;
    last = std::min(last + m + 1, trace_len);
}

} // namespace detail

/// Profiles the given parameters with fixed-vs-random TVLA campaigns on the
/// (simulated) profiling device: per parameter, samples with |t| above the
/// threshold and a recommended attack window around the first leak cluster.
inline LeakMap profile(const LayerSchedule &sched, std::size_t n_weights_to_profile,
                       bool profile_bias, const ProfileConfig &cfg) {
    LeakMap map;
    map.samples_per_step = cfg.leakage.samples_per_step;
    map.leak_offset = cfg.leakage.leak_offset;
    map.jitter_pad = cfg.leakage.jitter_max;

    TvlaCampaignConfig tv;
    tv.leakage = cfg.leakage;
    tv.input = cfg.input;
    tv.weight_lo = cfg.weight_lo;
    tv.weight_hi = cfg.weight_hi;
    tv.n_per_group = cfg.n_per_group;
    tv.workers = cfg.workers;

    std::vector<double> fixed_values = cfg.fixed_values;
    if (fixed_values.empty())
        fixed_values = sched.dtype == Dtype::Fp16 ? std::vector<double>{5.0, -5.0, 3.2109375}
                                                  : std::vector<double>{100, -100, 77};

    const std::size_t total =
        std::min(n_weights_to_profile, sched.order.size()) + (profile_bias ? 1 : 0);
    for (std::size_t p = 0; p < total; ++p) {
        const bool is_bias = profile_bias && p == total - 1 && p >= n_weights_to_profile;
        TvlaTarget target;
        target.is_bias = is_bias;
        target.order_index = is_bias ? 0 : static_cast<int>(p);

        tv.master_seed = derive_seed(cfg.master_seed, p, 0xAB);

        // One random group per parameter, shared by every fixed value.
        MemTraceSet random_set;
        MemSink random_sink(random_set);
        run_tvla_group(sched, target, std::nullopt, tv, random_sink, 1);

        ParamLeak leak;
        std::set<std::size_t> points;
        for (std::size_t vi = 0; vi < fixed_values.size(); ++vi) {
            MemTraceSet fixed_set;
            MemSink fixed_sink(fixed_set);
            run_tvla_group(sched, target, fixed_values[vi], tv, fixed_sink,
                           vi == 0 ? 0 : static_cast<unsigned>(vi + 1));
            const TvlaReport rep = tvla(fixed_set, random_set, cfg.threshold);
            points.insert(rep.leak_points.begin(), rep.leak_points.end());
            for (double t : rep.t_values)
                leak.peak_t = std::max(leak.peak_t, std::fabs(t));
        }
        leak.leak_samples.assign(points.begin(), points.end());
        if (!leak.leak_samples.empty()) {
            leak.profiled = true;
            detail::first_cluster_window(leak.leak_samples, cfg.margin,
                                         random_set.trace_length(), leak.window_first,
                                         leak.window_last);
        }
        if (is_bias)
            map.bias = leak;
        else
            map.weights.push_back(leak);
    }
    return map;
}

// --- hypothesis builders ---

namespace detail {

struct ParsedSet {
    std::vector<TraceMeta> metas;
};

inline ParsedSet parse_all_metas(const TraceSource &src, Dtype dtype) {
    ParsedSet ps;
    ps.metas.reserve(src.size());
    for (std::size_t i = 0; i < src.size(); ++i)
        ps.metas.push_back(parse_meta(src.meta(i), dtype));
    return ps;
}

/// Chain entries (order indices) feeding the target's accumulator value.
/// fp16 lanes are independent chains; the int8 accumulator is shared.
struct ChainPlan {
    // Entries strictly before the target's step, with known weight.
    std::vector<std::size_t> known_prior;
    // Entries of the target's step other than the target lane, known weight.
    std::vector<std::size_t> known_same_step;
    // Entries whose weight is unknown; usable traces must have zero inputs.
    std::vector<std::size_t> unknown;
};

inline ChainPlan plan_chain(const LayerSchedule &sched, std::size_t j,
                            const std::vector<std::optional<double>> &priors) {
    const auto &target = sched.order[j];
    ChainPlan plan;
    for (std::size_t i = 0; i < sched.order.size(); ++i) {
        if (i == j)
            continue;
        const auto &e = sched.order[i];
        if (e.accumulator_id != target.accumulator_id)
            continue;
        if (sched.dtype == Dtype::Fp16 && e.lane != target.lane)
            continue; // fp16 lanes never interact before the combine
        const bool same_step = (e.step == target.step);
        if (e.step > target.step)
            continue; // later steps cannot affect the target value
        const bool known = i < priors.size() && priors[i].has_value();
        if (known) {
            (same_step ? plan.known_same_step : plan.known_prior).push_back(i);
        } else {
            plan.unknown.push_back(i);
        }
    }
    return plan;
}

inline std::uint32_t input_pattern(const LayerSchedule &sched, const TraceMeta &m,
                                   const LayerSchedule::WeightRef &e) {
    const auto &st = sched.steps[static_cast<std::size_t>(e.step)];
    return m.inputs[0][static_cast<std::size_t>(st.input_idx[e.lane])];
}

inline bool pattern_is_zero(std::uint32_t p, Dtype dtype) {
    return dtype == Dtype::Fp16 ? (p & 0x7FFF) == 0 : p == 0;
}

} // namespace detail

/// Hypothesis for one weight: replay the accumulator prefix with recovered
/// weights, apply the candidate, and model the register write.
class WeightHypothesis final : public HypothesisSource {
  public:
    WeightHypothesis(const LayerSchedule &sched, const detail::ParsedSet &metas,
                     const std::vector<std::size_t> &trace_ids, std::size_t j,
                     const std::vector<std::optional<double>> &priors,
                     const CandidateSpace &space, LeakModel model)
        : sched_(sched), metas_(metas), ids_(trace_ids), j_(j), space_(space), model_(model),
          plan_(detail::plan_chain(sched, j, priors)) {
        for (std::size_t i : plan_.known_prior)
            prior_w_.push_back(encode_weight(*priors[i]));
        for (std::size_t i : plan_.known_same_step)
            same_w_.push_back(encode_weight(*priors[i]));
    }

    std::size_t candidate_count() const override { return space_.count(); }

    void prepare(std::size_t first, std::size_t count) override {
        base_.resize(count);
        xj_.resize(count);
        sprev_.resize(count);
        if (sched_.dtype == Dtype::Fp16) {
            xj_d_.resize(count);
            sprev_d_.resize(count);
        }
        const auto &target = sched_.order[j_];
        for (std::size_t k = 0; k < count; ++k) {
            const TraceMeta &m = metas_.metas[ids_[first + k]];
            if (sched_.dtype == Dtype::Fp16) {
                fp16::half_t s = 0;
                for (std::size_t idx = 0; idx < plan_.known_prior.size(); ++idx) {
                    const auto &e = sched_.order[plan_.known_prior[idx]];
                    const auto x = static_cast<fp16::half_t>(detail::input_pattern(sched_, m, e));
                    s = fp16::fma(static_cast<fp16::half_t>(prior_w_[idx]), x, s);
                }
                sprev_[k] = s;
                base_[k] = s; // fp16 lanes have no same-step cross terms
                sprev_d_[k] = fp16::decode(s);
                xj_d_[k] = fp16::decode(
                    static_cast<fp16::half_t>(detail::input_pattern(sched_, m, target)));
            } else {
                std::uint32_t s = 0;
                for (std::size_t idx = 0; idx < plan_.known_prior.size(); ++idx) {
                    const auto &e = sched_.order[plan_.known_prior[idx]];
                    const auto x = static_cast<std::int32_t>(static_cast<std::int8_t>(
                        static_cast<std::uint8_t>(detail::input_pattern(sched_, m, e))));
                    const auto w = static_cast<std::int32_t>(
                        static_cast<std::int8_t>(static_cast<std::uint8_t>(prior_w_[idx])));
                    s += static_cast<std::uint32_t>(w * x);
                }
                sprev_[k] = s;
                std::uint32_t b = s;
                for (std::size_t idx = 0; idx < plan_.known_same_step.size(); ++idx) {
                    const auto &e = sched_.order[plan_.known_same_step[idx]];
                    const auto x = static_cast<std::int32_t>(static_cast<std::int8_t>(
                        static_cast<std::uint8_t>(detail::input_pattern(sched_, m, e))));
                    const auto w = static_cast<std::int32_t>(
                        static_cast<std::int8_t>(static_cast<std::uint8_t>(same_w_[idx])));
                    b += static_cast<std::uint32_t>(w * x);
                }
                base_[k] = b;
            }
            xj_[k] = detail::input_pattern(sched_, m, target);
        }
    }

    void fill(std::size_t c0, std::size_t c1, std::size_t count, std::uint8_t *out) const override {
        const std::size_t m = count;
        if (sched_.dtype == Dtype::Fp16) {
            for (std::size_t c = c0; c < c1; ++c) {
                const double cand = fp16::decode(static_cast<fp16::half_t>(space_.values[c]));
                std::uint8_t *row = out + (c - c0) * m;
                if (model_ == LeakModel::HW) {
                    for (std::size_t k = 0; k < m; ++k)
                        row[k] = static_cast<std::uint8_t>(
                            hw16(fp16::fma_decoded(cand, xj_d_[k], sprev_d_[k])));
                } else {
                    for (std::size_t k = 0; k < m; ++k) {
                        const fp16::half_t v = fp16::fma_decoded(cand, xj_d_[k], sprev_d_[k]);
                        row[k] = static_cast<std::uint8_t>(hd16(sprev_[k], v));
                    }
                }
            }
        } else {
            for (std::size_t c = c0; c < c1; ++c) {
                const auto cand = static_cast<std::int32_t>(
                    static_cast<std::int8_t>(static_cast<std::uint8_t>(space_.values[c])));
                std::uint8_t *row = out + (c - c0) * m;
                for (std::size_t k = 0; k < m; ++k) {
                    const auto x = static_cast<std::int32_t>(
                        static_cast<std::int8_t>(static_cast<std::uint8_t>(xj_[k])));
                    const std::uint32_t v = base_[k] + static_cast<std::uint32_t>(cand * x);
                    row[k] = static_cast<std::uint8_t>(model_ == LeakModel::HW
                                                           ? hw32(v)
                                                           : hd32(sprev_[k], v));
                }
            }
        }
    }

    const detail::ChainPlan &plan() const { return plan_; }

  private:
    std::uint32_t encode_weight(double w) const {
        if (sched_.dtype == Dtype::Fp16)
            return fp16::encode(w);
        return static_cast<std::uint8_t>(static_cast<std::int8_t>(w));
    }

    const LayerSchedule &sched_;
    const detail::ParsedSet &metas_;
    const std::vector<std::size_t> &ids_;
    std::size_t j_;
    const CandidateSpace &space_;
    LeakModel model_;
    detail::ChainPlan plan_;
    std::vector<std::uint32_t> prior_w_, same_w_;
    std::vector<std::uint32_t> base_, xj_, sprev_;
    std::vector<double> xj_d_, sprev_d_; // fp16 fast path operands
};

// --- bias ---

/// Bias leakage models: HW of c_out, HW of the activation output c_f, or the
/// register update HD(c_sum, c_out).
enum class BiasModel { HwCout, HwCf, HdCsumCout };

inline const char *to_string(BiasModel m) {
    switch (m) {
    case BiasModel::HwCout: return "hw_cout";
    case BiasModel::HwCf: return "hw_cf";
    case BiasModel::HdCsumCout: return "hd_csum_cout";
    }
    return "?";
}

/// Hypothesis for the fp16 bias. Requires all kernel weights, from which
/// each trace's c_sum is replayed exactly.
class BiasHypothesis final : public HypothesisSource {
  public:
    BiasHypothesis(const LayerSchedule &sched, const detail::ParsedSet &metas,
                   const std::vector<std::size_t> &trace_ids,
                   const std::vector<double> &weights, const CandidateSpace &space,
                   BiasModel model)
        : sched_(sched), metas_(metas), ids_(trace_ids), space_(space), model_(model) {
        if (sched.dtype != Dtype::Fp16)
            throw UsageError("bias extraction supports fp16 kernels only "
                             "(int8 models carry an FP32 bias)");
        if (static_cast<int>(weights.size()) != sched.n_weights)
            throw UsageError("bias extraction requires all kernel weights");
        w16_.reserve(weights.size());
        for (double w : weights)
            w16_.push_back(fp16::encode(w));
    }

    std::size_t candidate_count() const override { return space_.count(); }

    void prepare(std::size_t first, std::size_t count) override {
        csum_.resize(count);
        csum_d_.resize(count);
        for (std::size_t k = 0; k < count; ++k) {
            const TraceMeta &m = metas_.metas[ids_[first + k]];
            fp16::half_t lane0 = 0, lane1 = 0;
            for (const auto &e : sched_.order) {
                const auto x = static_cast<fp16::half_t>(detail::input_pattern(sched_, m, e));
                const fp16::half_t w = w16_[static_cast<std::size_t>(e.weight)];
                if (e.lane == 0)
                    lane0 = fp16::fma(w, x, lane0);
                else
                    lane1 = fp16::fma(w, x, lane1);
            }
            csum_[k] = fp16::add(lane0, lane1);
            csum_d_[k] = fp16::decode(csum_[k]);
        }
    }

    void fill(std::size_t c0, std::size_t c1, std::size_t count, std::uint8_t *out) const override {
        for (std::size_t c = c0; c < c1; ++c) {
            const double cand = fp16::decode(static_cast<fp16::half_t>(space_.values[c]));
            std::uint8_t *row = out + (c - c0) * count;
            for (std::size_t k = 0; k < count; ++k) {
                const fp16::half_t cout = fp16::fma_decoded(1.0, cand, csum_d_[k]);
                switch (model_) {
                case BiasModel::HwCout:
                    row[k] = static_cast<std::uint8_t>(hw16(cout));
                    break;
                case BiasModel::HwCf:
                    row[k] = static_cast<std::uint8_t>(hw16(fp16::relu(cout)));
                    break;
                case BiasModel::HdCsumCout:
                    row[k] = static_cast<std::uint8_t>(hd16(csum_[k], cout));
                    break;
                }
            }
        }
    }

  private:
    const LayerSchedule &sched_;
    const detail::ParsedSet &metas_;
    const std::vector<std::size_t> &ids_;
    const CandidateSpace &space_;
    BiasModel model_;
    std::vector<fp16::half_t> w16_;
    std::vector<fp16::half_t> csum_;
    std::vector<double> csum_d_;
};

// --- extraction ---

struct ExtractionConfig {
    std::size_t window_first = 0;
    std::size_t window_last = 0;
    std::size_t chunk_size = 4096;
    std::vector<std::size_t> checkpoints; // empty: 10 log-spaced counts
    double confidence_ratio = 1.1;
    int workers = 0;
};

struct ParamExtraction {
    std::string name;
    std::uint32_t pattern = 0;
    double value = 0.0;
    double best_score = 0.0;
    double runner_up = 0.0;
    bool accepted = false;
    std::size_t traces_used = 0;
    std::size_t window_first = 0, window_last = 0;
    CemaResult cema;
};

namespace detail {

inline ParamExtraction summarize(const CemaResult &res, const CandidateSpace &space,
                                 double confidence_ratio, std::string name) {
    ParamExtraction px;
    px.name = std::move(name);
    px.traces_used = res.n_traces;
    px.window_first = res.window_first;
    px.window_last = res.window_first + res.window_width;
    const std::size_t best = res.ranking[0];
    px.pattern = space.values[best];
    px.value = space.value_at(best);
    px.best_score = res.best_abs[best];
    px.runner_up = res.ranking.size() > 1 ? res.best_abs[res.ranking[1]] : 0.0;
    px.accepted = px.runner_up <= 0.0 ? px.best_score > 0.0
                                      : px.best_score >= confidence_ratio * px.runner_up;
    px.cema = res;
    return px;
}

/// Traces whose unknown chain entries all have zero inputs; only those can
/// be predicted exactly. Mirrors zero-lane trace filtering of chosen-input
/// campaigns.
inline std::vector<std::size_t> usable_traces(const LayerSchedule &sched,
                                              const ParsedSet &metas,
                                              const ChainPlan &plan) {
    std::vector<std::size_t> ids;
    ids.reserve(metas.metas.size());
    for (std::size_t i = 0; i < metas.metas.size(); ++i) {
        bool ok = true;
        for (std::size_t u : plan.unknown) {
            const auto &e = sched.order[u];
            if (!pattern_is_zero(input_pattern(sched, metas.metas[i], e), sched.dtype)) {
                ok = false;
                break;
            }
        }
        if (ok)
            ids.push_back(i);
    }
    return ids;
}

} // namespace detail

/// Recovers weight j (0-based schedule order) by CEMA over the window.
/// priors[i] must hold the recovered value of weight i for every entry the
/// hypothesis needs; traces that activate unknown entries are filtered out.
inline ParamExtraction extract_weight(const TraceSource &traces, const LayerSchedule &sched,
                                      std::size_t j,
                                      const std::vector<std::optional<double>> &priors,
                                      LeakModel model, const CandidateSpace &space,
                                      const ExtractionConfig &cfg,
                                      const detail::ParsedSet *parsed = nullptr) {
    if (j >= sched.order.size())
        throw UsageError("weight index out of range");
    if (cfg.window_first >= cfg.window_last)
        throw UsageError("weight " + std::to_string(j + 1) +
                         " has no attack window (unprofiled and no override)");

    std::optional<detail::ParsedSet> own;
    if (!parsed) {
        own = detail::parse_all_metas(traces, sched.dtype);
        parsed = &*own;
    }

    const detail::ChainPlan plan = detail::plan_chain(sched, j, priors);
    std::vector<std::size_t> ids = detail::usable_traces(sched, *parsed, plan);
    if (ids.size() < 2) {
        if (sched.dtype == Dtype::Int8 && !plan.unknown.empty())
            throw UsageError(
                "weight " + std::to_string(j + 1) +
                " shares its partial sums with unrecovered weights and no trace has zero "
                "inputs on those lanes; use a chosen-input campaign, recover the earlier "
                "weights first, or enable the joint multi-weight mode");
        throw UsageError("not enough usable traces for weight " + std::to_string(j + 1));
    }

    WeightHypothesis hyp(sched, *parsed, ids, j, priors, space, model);

    FilteredSource view(traces, ids);
    const TraceSource &src = ids.size() == traces.size() ? traces : view;

    CemaConfig cc;
    cc.window_first = cfg.window_first;
    cc.window_last = cfg.window_last;
    cc.chunk_size = cfg.chunk_size;
    cc.checkpoints = cfg.checkpoints.empty() ? log_checkpoints(src.size()) : cfg.checkpoints;
    cc.workers = cfg.workers;

    const CemaResult res = cema(src, hyp, cc);
    return detail::summarize(res, space, cfg.confidence_ratio,
                             "w" + std::to_string(j + 1) + "_" + to_string(model));
}

/// Recovers the fp16 bias with the chosen model; all weights must be known.
inline ParamExtraction extract_bias(const TraceSource &traces, const LayerSchedule &sched,
                                    const std::vector<double> &weights, BiasModel model,
                                    const CandidateSpace &space, const ExtractionConfig &cfg,
                                    const detail::ParsedSet *parsed = nullptr) {
    if (!sched.has_bias)
        throw UsageError("schedule has no bias");
    if (cfg.window_first >= cfg.window_last)
        throw UsageError("bias has no attack window (unprofiled and no override)");

    std::optional<detail::ParsedSet> own;
    if (!parsed) {
        own = detail::parse_all_metas(traces, sched.dtype);
        parsed = &*own;
    }
    std::vector<std::size_t> ids(traces.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        ids[i] = i;

    BiasHypothesis hyp(sched, *parsed, ids, weights, space, model);

    CemaConfig cc;
    cc.window_first = cfg.window_first;
    cc.window_last = cfg.window_last;
    cc.chunk_size = cfg.chunk_size;
    cc.checkpoints = cfg.checkpoints.empty() ? log_checkpoints(traces.size()) : cfg.checkpoints;
    cc.workers = cfg.workers;

    const CemaResult res = cema(traces, hyp, cc);
    return detail::summarize(res, space, cfg.confidence_ratio,
                             std::string("bias_") + to_string(model));
}

/// Joint hypothesis over two unknown weights of one int8 step (the target
/// lane plus one more). 2^16 joint candidates indexed i0 * 256 + i1 in the
/// int8 enumeration order of (target, other). Joint spaces beyond two lanes
/// (2^24, 2^32 candidates) are refused: the per-candidate moment grid alone
/// would need tens of gigabytes; use chosen inputs or zero-lane filtering.
class JointInt8Hypothesis final : public HypothesisSource {
  public:
    JointInt8Hypothesis(const LayerSchedule &sched, const detail::ParsedSet &metas,
                        const std::vector<std::size_t> &trace_ids, std::size_t j0,
                        std::size_t j1, const std::vector<std::optional<double>> &priors,
                        LeakModel model)
        : sched_(sched), metas_(metas), ids_(trace_ids), j0_(j0), j1_(j1), model_(model) {
        if (sched.dtype != Dtype::Int8)
            throw UsageError("joint extraction targets int8 steps");
        if (sched.order[j0].step != sched.order[j1].step)
            throw UsageError("joint extraction requires weights of the same step");
        auto pri = priors;
        if (pri.size() < sched.order.size())
            pri.resize(sched.order.size());
        pri[j1] = 0.0; // treated as a candidate, not an unknown
        plan_ = detail::plan_chain(sched, j0, pri);
        // Drop the placeholder from the known set; candidates supply it.
        std::erase(plan_.known_same_step, j1);
        for (std::size_t i : plan_.known_prior)
            prior_w_.push_back(static_cast<std::uint8_t>(
                static_cast<std::int8_t>(*priors[i])));
        for (std::size_t i : plan_.known_same_step)
            same_w_.push_back(
                static_cast<std::uint8_t>(static_cast<std::int8_t>(*priors[i])));
    }

    std::size_t candidate_count() const override { return 256 * 256; }

    void prepare(std::size_t first, std::size_t count) override {
        base_.resize(count);
        sprev_.resize(count);
        x0_.resize(count);
        x1_.resize(count);
        for (std::size_t k = 0; k < count; ++k) {
            const TraceMeta &m = metas_.metas[ids_[first + k]];
            std::uint32_t s = 0;
            for (std::size_t idx = 0; idx < plan_.known_prior.size(); ++idx) {
                const auto &e = sched_.order[plan_.known_prior[idx]];
                const auto x = static_cast<std::int32_t>(static_cast<std::int8_t>(
                    static_cast<std::uint8_t>(detail::input_pattern(sched_, m, e))));
                const auto w = static_cast<std::int32_t>(
                    static_cast<std::int8_t>(prior_w_[idx]));
                s += static_cast<std::uint32_t>(w * x);
            }
            sprev_[k] = s;
            std::uint32_t b = s;
            for (std::size_t idx = 0; idx < plan_.known_same_step.size(); ++idx) {
                const auto &e = sched_.order[plan_.known_same_step[idx]];
                const auto x = static_cast<std::int32_t>(static_cast<std::int8_t>(
                    static_cast<std::uint8_t>(detail::input_pattern(sched_, m, e))));
                const auto w =
                    static_cast<std::int32_t>(static_cast<std::int8_t>(same_w_[idx]));
                b += static_cast<std::uint32_t>(w * x);
            }
            base_[k] = b;
            x0_[k] = static_cast<std::int32_t>(static_cast<std::int8_t>(static_cast<std::uint8_t>(
                detail::input_pattern(sched_, m, sched_.order[j0_]))));
            x1_[k] = static_cast<std::int32_t>(static_cast<std::int8_t>(static_cast<std::uint8_t>(
                detail::input_pattern(sched_, m, sched_.order[j1_]))));
        }
    }

    void fill(std::size_t c0, std::size_t c1, std::size_t count, std::uint8_t *out) const override {
        for (std::size_t c = c0; c < c1; ++c) {
            const auto w0 = static_cast<std::int32_t>(c / 256) - 128;
            const auto w1 = static_cast<std::int32_t>(c % 256) - 128;
            std::uint8_t *row = out + (c - c0) * count;
            for (std::size_t k = 0; k < count; ++k) {
                const std::uint32_t v =
                    base_[k] + static_cast<std::uint32_t>(w0 * x0_[k] + w1 * x1_[k]);
                row[k] = static_cast<std::uint8_t>(model_ == LeakModel::HW ? hw32(v)
                                                                           : hd32(sprev_[k], v));
            }
        }
    }

    const detail::ChainPlan &plan() const { return plan_; }
    static std::pair<int, int> decompose(std::size_t joint_index) {
        return {static_cast<int>(joint_index / 256) - 128,
                static_cast<int>(joint_index % 256) - 128};
    }

  private:
    const LayerSchedule &sched_;
    const detail::ParsedSet &metas_;
    const std::vector<std::size_t> &ids_;
    std::size_t j0_, j1_;
    LeakModel model_;
    detail::ChainPlan plan_;
    std::vector<std::uint8_t> prior_w_, same_w_;
    std::vector<std::uint32_t> base_, sprev_;
    std::vector<std::int32_t> x0_, x1_;
};

/// Joint recovery of two same-step int8 weights; returns one extraction per
/// weight (shared scores, decomposed values).
inline std::pair<ParamExtraction, ParamExtraction>
extract_weight_pair(const TraceSource &traces, const LayerSchedule &sched, std::size_t j0,
                    std::size_t j1, const std::vector<std::optional<double>> &priors,
                    LeakModel model, const ExtractionConfig &cfg,
                    const detail::ParsedSet *parsed = nullptr) {
    if (j0 >= sched.order.size() || j1 >= sched.order.size() || j0 == j1)
        throw UsageError("bad joint weight indices");
    if (cfg.window_first >= cfg.window_last)
        throw UsageError("joint extraction has no attack window");
    std::optional<detail::ParsedSet> own;
    if (!parsed) {
        own = detail::parse_all_metas(traces, sched.dtype);
        parsed = &*own;
    }

    std::vector<std::size_t> ids;
    {
        // Usability under the joint plan: both target weights are candidates.
        auto pri = priors;
        if (pri.size() < sched.order.size())
            pri.resize(sched.order.size());
        pri[j1] = 0.0;
        const detail::ChainPlan plan = detail::plan_chain(sched, j0, pri);
        ids = detail::usable_traces(sched, *parsed, plan);
    }
    if (ids.size() < 2)
        throw UsageError("not enough usable traces for the joint extraction");

    JointInt8Hypothesis hyp(sched, *parsed, ids, j0, j1, priors, model);

    FilteredSource view(traces, ids);
    const TraceSource &src = ids.size() == traces.size() ? traces : view;

    CemaConfig cc;
    cc.window_first = cfg.window_first;
    cc.window_last = cfg.window_last;
    cc.chunk_size = cfg.chunk_size;
    cc.checkpoints = cfg.checkpoints.empty() ? log_checkpoints(src.size()) : cfg.checkpoints;
    cc.workers = cfg.workers;

    const CemaResult res = cema(src, hyp, cc);
    const std::size_t best = res.ranking[0];
    const auto [w0, w1] = JointInt8Hypothesis::decompose(best);

    ParamExtraction a;
    a.name = "w" + std::to_string(j0 + 1) + "_joint_" + to_string(model);
    a.pattern = static_cast<std::uint8_t>(static_cast<std::int8_t>(w0));
    a.value = w0;
    a.best_score = res.best_abs[best];
    a.runner_up = res.ranking.size() > 1 ? res.best_abs[res.ranking[1]] : 0.0;
    a.accepted = a.runner_up <= 0.0 ? a.best_score > 0.0
                                    : a.best_score >= cfg.confidence_ratio * a.runner_up;
    a.traces_used = res.n_traces;
    a.window_first = res.window_first;
    a.window_last = res.window_first + res.window_width;

    ParamExtraction b = a;
    b.name = "w" + std::to_string(j1 + 1) + "_joint_" + to_string(model);
    b.pattern = static_cast<std::uint8_t>(static_cast<std::int8_t>(w1));
    b.value = w1;
    a.cema = res; // the shared grid is attached once
    return {std::move(a), std::move(b)};
}

// --- whole-kernel extraction ---

struct KernelAttackConfig {
    LeakModel weight_model = LeakModel::HW;
    BiasModel bias_model = BiasModel::HdCsumCout;
    CandidateSpace weight_space;
    CandidateSpace bias_space;
    LeakMap leak_map;
    // Explicit per-parameter window overrides (schedule order; entry n_weights
    // is the bias), taking precedence over the leak map.
    std::vector<std::optional<std::pair<std::size_t, std::size_t>>> window_overrides;
    std::size_t max_weights = 0; // 0: all weights of the schedule
    bool do_bias = true;
    bool multi_weight = false; // joint 2-lane mode for shared int8 partial sums
    std::size_t chunk_size = 4096;
    std::vector<std::size_t> checkpoints;
    double confidence_ratio = 1.1;
    int workers = 0;
};

struct AttackResult {
    std::vector<ParamExtraction> params;
    bool complete = false;
    std::string failure;
};

namespace detail {

inline bool window_for(const KernelAttackConfig &cfg, std::size_t param, bool is_bias,
                       std::size_t &first, std::size_t &last) {
    if (param < cfg.window_overrides.size() && cfg.window_overrides[param]) {
        first = cfg.window_overrides[param]->first;
        last = cfg.window_overrides[param]->second;
        return true;
    }
    const ParamLeak *leak = nullptr;
    if (is_bias) {
        if (cfg.leak_map.bias && cfg.leak_map.bias->profiled)
            leak = &*cfg.leak_map.bias;
    } else if (param < cfg.leak_map.weights.size() && cfg.leak_map.weights[param].profiled) {
        leak = &cfg.leak_map.weights[param];
    }
    if (!leak)
        return false;
    first = leak->window_first;
    last = leak->window_last;
    return true;
}

} // namespace detail

/// Extracts the kernel's weights one by one in schedule order, feeding each
/// recovery forward as a prior, then the bias. A stage failure aborts with
/// the partial result preserved.
inline AttackResult extract_kernel(const TraceSource &traces, const LayerSchedule &sched,
                                   const KernelAttackConfig &cfg) {
    AttackResult result;
    const detail::ParsedSet parsed = detail::parse_all_metas(traces, sched.dtype);

    const std::size_t n_weights =
        cfg.max_weights ? std::min<std::size_t>(cfg.max_weights, sched.order.size())
                        : sched.order.size();
    std::vector<std::optional<double>> priors(sched.order.size());

    ExtractionConfig ex;
    ex.chunk_size = cfg.chunk_size;
    ex.checkpoints = cfg.checkpoints;
    ex.confidence_ratio = cfg.confidence_ratio;
    ex.workers = cfg.workers;

    for (std::size_t j = 0; j < n_weights; ++j) {
        if (priors[j])
            continue; // already recovered by a joint extraction
        std::size_t wf = 0, wl = 0;
        if (!detail::window_for(cfg, j, false, wf, wl)) {
            result.failure = "weight " + std::to_string(j + 1) +
                             " is unprofiled and has no window override";
            return result;
        }
        ex.window_first = wf;
        ex.window_last = wl;
        try {
            ParamExtraction px =
                extract_weight(traces, sched, j, priors, cfg.weight_model, cfg.weight_space, ex,
                               &parsed);
            priors[j] = px.value;
            result.params.push_back(std::move(px));
        } catch (const Error &e) {
            // Shared partial sums: fall back to the joint mode when enabled
            // and exactly one more weight of the step is unknown.
            std::vector<std::size_t> same_step_unknown;
            const auto &tj = sched.order[j];
            for (std::size_t i = j + 1; i < sched.order.size(); ++i)
                if (sched.order[i].step == tj.step && !priors[i])
                    same_step_unknown.push_back(i);
            if (!cfg.multi_weight || same_step_unknown.size() != 1 ||
                sched.dtype != Dtype::Int8) {
                result.failure = e.what();
                return result;
            }
            try {
                auto [a, b] = extract_weight_pair(traces, sched, j, same_step_unknown[0], priors,
                                                  cfg.weight_model, ex, &parsed);
                priors[j] = a.value;
                priors[same_step_unknown[0]] = b.value;
                result.params.push_back(std::move(a));
                result.params.push_back(std::move(b));
            } catch (const Error &e2) {
                result.failure = e2.what();
                return result;
            }
        }
    }

    if (cfg.do_bias && sched.has_bias) {
        if (n_weights < sched.order.size()) {
            result.failure = "bias extraction requires every kernel weight to be recovered";
            return result;
        }
        std::size_t wf = 0, wl = 0;
        if (!detail::window_for(cfg, n_weights, true, wf, wl)) {
            result.failure = "bias is unprofiled and has no window override";
            return result;
        }
        ex.window_first = wf;
        ex.window_last = wl;
        std::vector<double> weights(static_cast<std::size_t>(sched.n_weights));
        for (std::size_t i = 0; i < sched.order.size(); ++i)
            weights[static_cast<std::size_t>(sched.order[i].weight)] = priors[i].value_or(0.0);
        try {
            ParamExtraction px = extract_bias(traces, sched, weights, cfg.bias_model,
                                              cfg.bias_space, ex, &parsed);
            result.params.push_back(std::move(px));
        } catch (const Error &e) {
            result.failure = e.what();
            return result;
        }
    }

    result.complete = true;
    return result;
}

} // namespace scakit
