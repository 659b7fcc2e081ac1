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

// scakit command-line front end: simulate | tvla | align | attack | rank |
// report | convert. Every run is reproducible from its config file and seed.
//
// Exit codes: 0 success, 2 bad config/flags, 3 missing input file,
// 4 malformed input file, 5 contract violation, 1 internal error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "scakit/align.hpp"
#include "scakit/attack.hpp"
#include "scakit/csv.hpp"
#include "scakit/recipe.hpp"

namespace fs = std::filesystem;
using namespace scakit;

namespace {

void require_file(const std::string &path) {
    if (!fs::exists(path))
        throw ConfigError("NOFILE:" + path);
}

void ensure_dir(const std::string &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error("cannot create output directory: " + dir);
}

std::string join(const std::string &dir, const std::string &name) {
    return (fs::path(dir) / name).string();
}

// --- simulate ---

void write_manifest(const Config &cfg, const std::string &out_dir, std::uint64_t seed,
                    const std::vector<std::string> &stores) {
    Config m;
    for (const auto &k : cfg.keys())
        if (k.rfind("weights.", 0) != 0 && k != "bias")
            m.set(k, cfg.get_string(k));
    m.set("seed", std::to_string(seed));
    for (std::size_t i = 0; i < stores.size(); ++i)
        m.set("store." + std::to_string(i), stores[i]);
    m.write_file(join(out_dir, "manifest.cfg"));
}

void write_groundtruth(const Config &cfg, const LayerRecipe &lr, const std::string &out_dir) {
    Config g;
    for (const auto &k : cfg.keys())
        if (k.rfind("layer.", 0) == 0)
            g.set(k, cfg.get_string(k));
    std::string w;
    for (std::size_t i = 0; i < lr.params.weights.size(); ++i) {
        if (i)
            w += ',';
        w += detail::fmt_f64(lr.params.weights[i]);
    }
    g.set("weights.values", w);
    if (lr.params.bias)
        g.set("bias", detail::fmt_f64(*lr.params.bias));
    g.write_file(join(out_dir, "groundtruth.cfg"));
}

int cmd_simulate(const std::string &config_path, const std::string &out_dir,
                 std::optional<std::uint64_t> seed_override, int workers) {
    require_file(config_path);
    ensure_dir(out_dir);
    const Config cfg = Config::parse_file(config_path);
    const std::uint64_t seed = seed_override ? *seed_override : cfg.get_u64("seed", 1);

    const LayerRecipe lr = build_layer(cfg, /*with_weights=*/true, seed);
    const LeakageSpec leakage = build_leakage(cfg);
    const std::string mode = cfg.get_string("mode", "attack");

    std::vector<std::string> stores;
    if (mode == "attack") {
        CampaignConfig cc;
        cc.leakage = leakage;
        cc.input = build_input(cfg);
        cc.master_seed = seed;
        cc.n_traces = cfg.get_u64("n_traces");
        cc.capture = build_capture(cfg, lr.schedule.step_count());
        cc.workers = workers;

        const std::size_t captured =
            std::min(cc.capture.last, lr.schedule.step_count()) - cc.capture.first;
        const std::string path = join(out_dir, "traces.bct");
        TraceStoreWriter w(path, static_cast<std::uint32_t>(leakage.trace_length(captured)));
        StoreSink sink(w);
        run_attack_campaign(lr.schedule, lr.params, cc, sink);
        w.seal();
        stores.push_back(path);
    } else if (mode == "tvla") {
        TvlaCampaignConfig tc;
        tc.leakage = leakage;
        tc.input = build_input(cfg);
        tc.weight_lo = cfg.get_f64("tvla.weight_lo", -5.0);
        tc.weight_hi = cfg.get_f64("tvla.weight_hi", 5.0);
        tc.master_seed = seed;
        tc.n_per_group = cfg.get_u64("tvla.n_per_group");
        tc.workers = workers;

        TvlaTarget target;
        const std::string t = cfg.get_string("tvla.target");
        if (t == "bias") {
            target.is_bias = true;
        } else if (t.size() > 1 && t[0] == 'w') {
            target.order_index = std::atoi(t.c_str() + 1) - 1;
        } else {
            throw ConfigError("tvla.target must be wN or bias");
        }

        const std::string fpath = join(out_dir, "traces_fixed.bct");
        const std::string rpath = join(out_dir, "traces_random.bct");
        const auto len = static_cast<std::uint32_t>(
            leakage.trace_length(lr.schedule.step_count()));
        TraceStoreWriter fw(fpath, len), rw(rpath, len);
        StoreSink fsink(fw), rsink(rw);
        run_tvla_campaign(lr.schedule, target, cfg.get_f64("tvla.fixed_value", 5.0), tc, fsink,
                          rsink);
        fw.seal();
        rw.seal();
        stores.push_back(fpath);
        stores.push_back(rpath);
    } else {
        throw ConfigError("unknown mode: " + mode);
    }

    write_manifest(cfg, out_dir, seed, stores);
    write_groundtruth(cfg, lr, out_dir);
    std::printf("simulate: wrote %zu store(s) under %s\n", stores.size(), out_dir.c_str());
    return 0;
}

// --- tvla ---

int cmd_tvla(const std::string &fixed_path, const std::string &random_path,
             const std::string &out_dir, double threshold) {
    require_file(fixed_path);
    require_file(random_path);
    ensure_dir(out_dir);
    TraceStore fixed(fixed_path), random(random_path);
    const TvlaReport rep = tvla(fixed, random, threshold);
    write_t_trace_csv(join(out_dir, "t_trace.csv"), rep);
    write_leak_points_csv(join(out_dir, "leak_points.csv"), rep);
    std::printf("tvla: %zu leak point(s) above |t| > %g\n", rep.leak_points.size(), threshold);
    return 0;
}

// --- align ---

AlignmentConfig align_config_from(const Config &cfg, const TraceSource &src) {
    AlignmentConfig ac;
    ac.window_first = cfg.get_u64("window.first");
    ac.window_last = cfg.get_u64("window.last");
    ac.max_shift = static_cast<int>(cfg.get_i64("max_shift"));
    const std::string ref = cfg.get_string("reference", "trace");
    if (ref == "trace") {
        ac.source = ReferenceSource::TraceIndex;
        ac.reference_trace = cfg.get_u64("reference.trace", 0);
    } else if (ref == "mean") {
        ac.source = ReferenceSource::MeanOfFirst;
        ac.mean_count = cfg.get_u64("reference.mean_count", 100);
    } else if (ref == "file") {
        const std::string p = cfg.get_string("reference.file");
        require_file(p);
        std::ifstream in(p);
        std::string line;
        std::getline(in, line);
        const char *s = line.c_str();
        char *end = nullptr;
        while (*s) {
            const float v = std::strtof(s, &end);
            if (end == s)
                break;
            ac.pattern.push_back(v);
            s = end;
            while (*s == ',' || *s == ' ')
                ++s;
        }
        ac.source = ReferenceSource::Explicit;
    } else {
        throw ConfigError("unknown reference source: " + ref);
    }
    ac.validate(src);
    return ac;
}

int cmd_align(const std::string &in_path, const std::string &config_path,
              const std::string &out_dir, int workers) {
    require_file(in_path);
    require_file(config_path);
    ensure_dir(out_dir);
    const Config cfg = Config::parse_file(config_path);
    TraceStore in(in_path);

    const int passes = static_cast<int>(cfg.get_i64("passes", 1));
    const std::string out_path = join(out_dir, "aligned.bct");

    if (passes == 1) {
        AlignmentConfig ac = align_config_from(cfg, in);
        TraceStoreWriter w(out_path, static_cast<std::uint32_t>(in.trace_length()));
        StoreSink sink(w);
        const AlignmentOffsets off = static_align(in, ac, sink, workers);
        w.seal();
        write_offsets_csv(join(out_dir, "offsets.csv"), off);
        std::printf("align: %zu trace(s) aligned\n", off.offsets.size());
        return 0;
    }

    // Two passes: first against the configured reference, then against the
    // mean of the first k aligned traces (residual shifts only).
    AlignmentConfig ac = align_config_from(cfg, in);
    const std::string tmp_path = join(out_dir, "aligned_pass1.bct");
    {
        TraceStoreWriter w(tmp_path, static_cast<std::uint32_t>(in.trace_length()));
        StoreSink sink(w);
        static_align(in, ac, sink, workers);
        w.seal();
    }
    TraceStore pass1(tmp_path);
    AlignmentConfig ac2 = ac;
    ac2.source = ReferenceSource::MeanOfFirst;
    ac2.mean_count = cfg.get_u64("pass2.mean_count", 1000);
    ac2.max_shift = static_cast<int>(cfg.get_i64("pass2.max_shift", ac.max_shift));
    std::vector<float> mean_ref = select_reference(pass1, ac2);
    AlignmentConfig final_cfg = ac;
    final_cfg.source = ReferenceSource::Explicit;
    final_cfg.pattern = std::move(mean_ref);

    TraceStoreWriter w(out_path, static_cast<std::uint32_t>(in.trace_length()));
    StoreSink sink(w);
    const AlignmentOffsets off = static_align(in, final_cfg, sink, workers);
    w.seal();
    fs::remove(tmp_path);
    write_offsets_csv(join(out_dir, "offsets.csv"), off);
    std::printf("align: %zu trace(s) aligned (2 passes)\n", off.offsets.size());
    return 0;
}

// --- attack ---

int cmd_attack(const std::string &traces_path, const std::string &config_path,
               const std::string &out_dir, std::optional<std::uint64_t> seed_override,
               int workers) {
    require_file(traces_path);
    require_file(config_path);
    ensure_dir(out_dir);
    const Config cfg = Config::parse_file(config_path);
    TraceStore traces(traces_path);

    const LayerRecipe lr = build_layer(cfg, /*with_weights=*/false, 0);
    const LayerSchedule &sched = lr.schedule;

    KernelAttackConfig kc;
    kc.weight_model = parse_leak_model(cfg.get_string("attack.model", "hw"));
    kc.bias_model = parse_bias_model(cfg.get_string("attack.bias_model", "hd_csum_cout"));
    const double lo = cfg.get_f64("space.lo", -5.0);
    const double hi = cfg.get_f64("space.hi", 5.0);
    kc.weight_space = enumerate_candidates(sched.dtype, lo, hi);
    kc.bias_space = enumerate_candidates(Dtype::Fp16, cfg.get_f64("space.bias_lo", lo),
                                         cfg.get_f64("space.bias_hi", hi));
    kc.max_weights = cfg.get_u64("attack.max_weights", 0);
    kc.do_bias = cfg.get_bool("attack.do_bias", true);
    kc.multi_weight = cfg.get_bool("attack.multi_weight", false);
    kc.chunk_size = cfg.get_u64("attack.chunk_size", 4096);
    kc.confidence_ratio = cfg.get_f64("attack.confidence_ratio", 1.1);
    kc.workers = workers;
    if (cfg.has("attack.checkpoints"))
        for (double v : cfg.get_f64_list("attack.checkpoints"))
            kc.checkpoints.push_back(static_cast<std::size_t>(v));

    // Windows: internal TVLA profiling on the simulated profiling device, or
    // explicit per-parameter overrides (attack.window.wN / attack.window.bias).
    const std::size_t n_weights = kc.max_weights ? kc.max_weights : sched.order.size();
    kc.window_overrides.resize(sched.order.size() + 1);
    const int window_shift = static_cast<int>(cfg.get_i64("attack.window_shift", 0));
    for (std::size_t j = 0; j <= sched.order.size(); ++j) {
        const std::string key = j < sched.order.size()
                                    ? "attack.window.w" + std::to_string(j + 1)
                                    : "attack.window.bias";
        if (cfg.has(key)) {
            const auto v = cfg.get_f64_list(key);
            if (v.size() != 2)
                throw ConfigError(key + " expects 'first,last'");
            kc.window_overrides[j] = {static_cast<std::size_t>(v[0]),
                                      static_cast<std::size_t>(v[1])};
        }
    }
    if (cfg.get_string("attack.profile", "auto") == "auto") {
        ProfileConfig pc;
        pc.leakage = build_leakage(cfg);
        pc.leakage.noise_sigma = cfg.get_f64("profile.noise_sigma", 1.0);
        pc.leakage.jitter_max = static_cast<int>(cfg.get_i64("profile.jitter_max", 0));
        pc.input = build_input(cfg);
        pc.n_per_group = cfg.get_u64("profile.n_per_group", 2000);
        if (cfg.has("profile.fixed_values"))
            pc.fixed_values = cfg.get_f64_list("profile.fixed_values");
        pc.weight_lo = lo;
        pc.weight_hi = hi;
        pc.margin = static_cast<int>(cfg.get_i64("profile.margin", 2));
        pc.master_seed = seed_override ? *seed_override : cfg.get_u64("profile.seed", 0x5ca1ab1e);
        pc.workers = workers;
        kc.leak_map = profile(sched, n_weights, sched.has_bias && kc.do_bias, pc);

        if (window_shift != 0) {
            auto shift_window = [&](ParamLeak &p) {
                if (!p.profiled)
                    return;
                p.window_first = static_cast<std::size_t>(
                    static_cast<std::ptrdiff_t>(p.window_first) + window_shift);
                p.window_last = static_cast<std::size_t>(
                    static_cast<std::ptrdiff_t>(p.window_last) + window_shift);
            };
            for (auto &p : kc.leak_map.weights)
                shift_window(p);
            if (kc.leak_map.bias)
                shift_window(*kc.leak_map.bias);
        }

        // Leak map report.
        auto out = detail::open_out(join(out_dir, "leakmap.csv"));
        out << "param,profiled,window_first,window_last,peak_t,leak_samples\n";
        for (std::size_t j = 0; j < kc.leak_map.weights.size(); ++j) {
            const auto &p = kc.leak_map.weights[j];
            out << 'w' << (j + 1) << ',' << (p.profiled ? 1 : 0) << ',' << p.window_first << ','
                << p.window_last << ',' << detail::fmt_f64(p.peak_t) << ',';
            for (std::size_t i = 0; i < p.leak_samples.size(); ++i)
                out << (i ? ";" : "") << p.leak_samples[i];
            out << '\n';
        }
        if (kc.leak_map.bias) {
            const auto &p = *kc.leak_map.bias;
            out << "bias," << (p.profiled ? 1 : 0) << ',' << p.window_first << ','
                << p.window_last << ',' << detail::fmt_f64(p.peak_t) << ',';
            for (std::size_t i = 0; i < p.leak_samples.size(); ++i)
                out << (i ? ";" : "") << p.leak_samples[i];
            out << '\n';
        }
    }

    const AttackResult res = extract_kernel(traces, sched, kc);

    write_recovered_csv(join(out_dir, "recovered.csv"), res);
    const std::size_t top_m = cfg.get_u64("attack.top_m", 100);
    for (const auto &p : res.params) {
        if (p.cema.best_abs.empty())
            continue;
        const CandidateSpace &space =
            p.name.rfind("bias", 0) == 0 ? kc.bias_space : kc.weight_space;
        if (space.count() == p.cema.best_abs.size()) {
            write_corr_curves_csv(join(out_dir, "corr_curve_" + p.name + ".csv"), p.cema, space,
                                  top_m);
            write_scores_bin(join(out_dir, "scores_" + p.name + ".bin"), p.cema, space);
        }
    }

    // Human-readable summary.
    {
        auto out = detail::open_out(join(out_dir, "summary.txt"));
        out << "scakit attack summary\n";
        out << "traces: " << traces_path << " (" << traces.size() << " traces, "
            << traces.trace_length() << " samples)\n";
        out << "layer: " << cfg.get_string("layer.kind", "conv") << " "
            << to_string(sched.dtype) << ", " << sched.order.size() << " weights"
            << (sched.has_bias ? " + bias" : "") << "\n";
        out << "model: " << to_string(kc.weight_model)
            << ", candidates per weight: " << kc.weight_space.count() << "\n\n";
        for (const auto &p : res.params) {
            char pat[16];
            std::snprintf(pat, sizeof(pat), "0x%04x", p.pattern);
            out << p.name << ": value " << detail::fmt_f64(p.value) << " (" << pat << "), score "
                << detail::fmt_f64(p.best_score) << ", runner-up "
                << detail::fmt_f64(p.runner_up) << ", "
                << (p.accepted ? "accepted" : "tentative") << ", window [" << p.window_first
                << ',' << p.window_last << "), " << p.traces_used << " traces\n";
        }
        if (!res.complete)
            out << "\nFAILED: " << res.failure << "\n";
    }

    if (!res.complete) {
        std::fprintf(stderr, "attack failed: %s\n", res.failure.c_str());
        return 5;
    }
    std::printf("attack: recovered %zu parameter(s)\n", res.params.size());
    return 0;
}

// --- rank ---

int cmd_rank(const std::string &attack_dir, const std::string &truth_path,
             const std::string &out_dir) {
    require_file(truth_path);
    if (!fs::exists(attack_dir))
        throw ConfigError("NOFILE:" + attack_dir);
    ensure_dir(out_dir);
    const Config truth_cfg = Config::parse_file(truth_path);
    const LayerRecipe lr = build_layer(truth_cfg, /*with_weights=*/true, 0);

    auto final_out = detail::open_out(join(out_dir, "final_ranks.csv"));
    final_out << "param,rank,truth_value,truth_pattern\n";

    for (const auto &entry : fs::directory_iterator(attack_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("scores_", 0) != 0 || entry.path().extension() != ".bin")
            continue;
        const std::string param = name.substr(7, name.size() - 7 - 4);
        const ScoreFile sf = read_scores_bin(entry.path().string());

        // Resolve the true pattern for this parameter.
        std::uint32_t truth_pattern = 0;
        double truth_value = 0.0;
        if (param.rfind("bias", 0) == 0) {
            if (!lr.params.bias)
                continue;
            truth_value = *lr.params.bias;
            truth_pattern = fp16::encode(truth_value);
        } else if (param[0] == 'w') {
            const int j = std::atoi(param.c_str() + 1) - 1;
            if (j < 0 || j >= static_cast<int>(lr.schedule.order.size()))
                continue;
            truth_value =
                lr.params.weights[static_cast<std::size_t>(lr.schedule.order[j].weight)];
            truth_pattern = lr.schedule.dtype == Dtype::Fp16
                                ? fp16::encode(truth_value)
                                : static_cast<std::uint8_t>(static_cast<std::int8_t>(truth_value));
        } else {
            continue;
        }

        const auto it = std::find(sf.patterns.begin(), sf.patterns.end(), truth_pattern);
        if (it == sf.patterns.end())
            throw UsageError("true candidate of " + param + " is outside the searched space");
        const auto truth_index = static_cast<std::size_t>(it - sf.patterns.begin());

        std::vector<std::pair<std::size_t, std::size_t>> curve;
        for (const auto &cp : sf.checkpoints)
            curve.emplace_back(cp.n_traces, key_rank_at(cp.scores, truth_index));
        write_rank_curve_csv(join(out_dir, "rank_curve_" + param + ".csv"), curve);
        char pat[16];
        std::snprintf(pat, sizeof(pat), "0x%04x", truth_pattern);
        final_out << param << ',' << curve.back().second << ',' << detail::fmt_f64(truth_value)
                  << ',' << pat << '\n';
    }
    std::printf("rank: curves written to %s\n", out_dir.c_str());
    return 0;
}

// --- report ---

int cmd_report(const std::string &attack_dir, const std::string &out_dir) {
    const std::string recovered = join(attack_dir, "recovered.csv");
    require_file(recovered);
    ensure_dir(out_dir);

    auto out = detail::open_out(join(out_dir, "report.txt"));
    out << "scakit attack report\n====================\n\n";

    std::ifstream rec(recovered);
    std::string line;
    std::getline(rec, line); // header
    out << "Recovered parameters:\n";
    while (std::getline(rec, line)) {
        if (line.empty())
            continue;
        out << "  " << line << '\n';
    }

    const std::string ranks = join(attack_dir, "final_ranks.csv");
    if (fs::exists(ranks)) {
        out << "\nKey ranks (vs ground truth):\n";
        std::ifstream rf(ranks);
        std::getline(rf, line);
        while (std::getline(rf, line))
            if (!line.empty())
                out << "  " << line << '\n';
    }

    const std::string leakmap = join(attack_dir, "leakmap.csv");
    if (fs::exists(leakmap)) {
        out << "\nLeak map:\n";
        std::ifstream lf(leakmap);
        std::getline(lf, line);
        while (std::getline(lf, line))
            if (!line.empty())
                out << "  " << line << '\n';
    }
    std::printf("report: written to %s\n", join(out_dir, "report.txt").c_str());
    return 0;
}

// --- convert ---

int cmd_convert(const std::string &csv, const std::string &store, bool to_store) {
    if (to_store) {
        require_file(csv);
        csv_to_store(csv, store);
        std::printf("convert: %s -> %s\n", csv.c_str(), store.c_str());
    } else {
        require_file(store);
        TraceStore s(store);
        store_to_csv(s, csv);
        std::printf("convert: %s -> %s\n", store.c_str(), csv.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"scakit - side-channel analysis toolkit and leakage simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", in_path, fixed_path, random_path, traces_path;
    std::string attack_dir, truth_path, csv_path, store_path;
    std::optional<std::uint64_t> seed;
    int workers = 0;
    double threshold = 4.5;
    bool to_store = false;

    auto *sim = app.add_subcommand("simulate", "run a trace-generation campaign");
    sim->add_option("--config", config_path, "campaign config file")->required();
    sim->add_option("--out", out_dir, "output directory")->required();
    sim->add_option("--seed", seed, "master seed override");
    sim->add_option("--workers", workers, "worker threads (0 = auto)");

    auto *tv = app.add_subcommand("tvla", "fixed-vs-random leakage assessment");
    tv->add_option("--fixed", fixed_path, "fixed-group trace store")->required();
    tv->add_option("--random", random_path, "random-group trace store")->required();
    tv->add_option("--out", out_dir, "output directory")->required();
    tv->add_option("--threshold", threshold, "|t| threshold (default 4.5)");

    auto *al = app.add_subcommand("align", "static alignment of a trace store");
    al->add_option("--in", in_path, "input trace store")->required();
    al->add_option("--config", config_path, "alignment config file")->required();
    al->add_option("--out", out_dir, "output directory")->required();
    al->add_option("--workers", workers, "worker threads (0 = auto)");

    auto *at = app.add_subcommand("attack", "profile and extract parameters");
    at->add_option("--traces", traces_path, "attack trace store")->required();
    at->add_option("--config", config_path, "attack recipe file")->required();
    at->add_option("--out", out_dir, "output directory")->required();
    at->add_option("--seed", seed, "profiling seed override");
    at->add_option("--workers", workers, "worker threads (0 = auto)");

    auto *rk = app.add_subcommand("rank", "key-rank curves against ground truth");
    rk->add_option("--attack", attack_dir, "attack output directory")->required();
    rk->add_option("--truth", truth_path, "ground-truth config")->required();
    rk->add_option("--out", out_dir, "output directory")->required();

    auto *rp = app.add_subcommand("report", "render a text report from attack artifacts");
    rp->add_option("--attack", attack_dir, "attack output directory")->required();
    rp->add_option("--out", out_dir, "output directory")->required();

    auto *cv = app.add_subcommand("convert", "CSV <-> trace store conversion");
    cv->add_option("--csv", csv_path, "CSV file (one trace per row)")->required();
    cv->add_option("--store", store_path, "trace store file")->required();
    cv->add_flag("--to-store", to_store, "convert CSV to store (default: store to CSV)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) ? 2 : 0;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(config_path, out_dir, seed, workers);
        if (tv->parsed())
            return cmd_tvla(fixed_path, random_path, out_dir, threshold);
        if (al->parsed())
            return cmd_align(in_path, config_path, out_dir, workers);
        if (at->parsed())
            return cmd_attack(traces_path, config_path, out_dir, seed, workers);
        if (rk->parsed())
            return cmd_rank(attack_dir, truth_path, out_dir);
        if (rp->parsed())
            return cmd_report(attack_dir, out_dir);
        if (cv->parsed())
            return cmd_convert(csv_path, store_path, to_store);
    } catch (const ConfigError &e) {
        const std::string msg = e.what();
        if (msg.rfind("NOFILE:", 0) == 0) {
            std::fprintf(stderr, "error: missing input file: %s\n", msg.c_str() + 7);
            return 3;
        }
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const FormatError &e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return 4;
    } catch (const IntegrityError &e) {
        std::fprintf(stderr, "integrity error: %s\n", e.what());
        return 4;
    } catch (const UsageError &e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 5;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
