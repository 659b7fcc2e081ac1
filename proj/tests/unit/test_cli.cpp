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

// Drives the scakit binary end to end on a miniature campaign:
// simulate -> tvla -> align -> attack -> rank -> report, plus the exit-code
// table and byte-level reproducibility of a repeated run.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <catch2/catch_amalgamated.hpp>

#include "scakit/config.hpp"
#include "scakit/tracestore.hpp"

namespace fs = std::filesystem;

namespace {

const char *cli = SCAKIT_CLI_PATH;

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("scakit_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string &name) const { return (path / name).string(); }
};

int run(const std::string &args) {
    const std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

void write_file(const std::string &path, const std::string &text) {
    std::ofstream out(path);
    out << text;
}

std::string slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

const char *kCampaign = R"(
mode = attack
seed = 4242
n_traces = 1200
layer.kind = conv
layer.dtype = fp16
layer.p = 2
layer.q = 2
layer.channels = 1
layer.relu = true
weights.source = list
weights.values = 0.8223, -0.5137, 1.25, -0.7705
bias = 0.4585
leak.model = hw
leak.noise_sigma = 0.75
input.dist = uniform
)";

const char *kRecipe = R"(
layer.kind = conv
layer.dtype = fp16
layer.p = 2
layer.q = 2
layer.channels = 1
layer.relu = true
layer.bias_present = true
space.lo = -5
space.hi = 5
attack.model = hw
attack.bias_model = hw_cout
attack.profile = auto
profile.n_per_group = 500
profile.noise_sigma = 0.75
profile.seed = 99
attack.chunk_size = 512
)";

} // namespace

TEST_CASE("full pipeline through the binary", "[cli]") {
    TempDir tmp;
    write_file(tmp.file("campaign.cfg"), kCampaign);
    write_file(tmp.file("recipe.cfg"), kRecipe);

    // simulate
    REQUIRE(run("simulate --config " + tmp.file("campaign.cfg") + " --out " + tmp.file("sim") +
                " --workers 2") == 0);
    REQUIRE(fs::exists(tmp.file("sim/traces.bct")));
    REQUIRE(fs::exists(tmp.file("sim/manifest.cfg")));
    REQUIRE(fs::exists(tmp.file("sim/groundtruth.cfg")));
    // the manifest must not contain the secrets
    const std::string manifest = slurp(tmp.file("sim/manifest.cfg"));
    REQUIRE(manifest.find("0.8223") == std::string::npos);

    // attack
    REQUIRE(run("attack --traces " + tmp.file("sim/traces.bct") + " --config " +
                tmp.file("recipe.cfg") + " --out " + tmp.file("atk") + " --workers 2") == 0);
    REQUIRE(fs::exists(tmp.file("atk/recovered.csv")));
    REQUIRE(fs::exists(tmp.file("atk/summary.txt")));
    REQUIRE(fs::exists(tmp.file("atk/leakmap.csv")));
    const std::string recovered = slurp(tmp.file("atk/recovered.csv"));
    REQUIRE(recovered.find("w1_hw,0x3a94,0.822265625,") != std::string::npos); // enc(0.8223)

    // rank against ground truth: every parameter at final rank 0
    REQUIRE(run("rank --attack " + tmp.file("atk") + " --truth " +
                tmp.file("sim/groundtruth.cfg") + " --out " + tmp.file("rank")) == 0);
    const std::string ranks = slurp(tmp.file("rank/final_ranks.csv"));
    for (const std::string param : {"w1_hw", "w2_hw", "w3_hw", "w4_hw", "bias_hw_cout"})
        REQUIRE(ranks.find(param + ",0,") != std::string::npos);

    // report renders without recomputation
    fs::copy(tmp.file("rank/final_ranks.csv"), tmp.file("atk/final_ranks.csv"));
    REQUIRE(run("report --attack " + tmp.file("atk") + " --out " + tmp.file("rep")) == 0);
    REQUIRE(slurp(tmp.file("rep/report.txt")).find("Key ranks") != std::string::npos);
}

TEST_CASE("tvla subcommand: identical sets report no leaks", "[cli]") {
    TempDir tmp;
    write_file(tmp.file("campaign.cfg"), kCampaign);
    REQUIRE(run("simulate --config " + tmp.file("campaign.cfg") + " --out " + tmp.file("sim")) ==
            0);
    // the same store on both inputs: Welch's t is 0 or degenerate everywhere
    REQUIRE(run("tvla --fixed " + tmp.file("sim/traces.bct") + " --random " +
                tmp.file("sim/traces.bct") + " --out " + tmp.file("tv")) == 0);
    const std::string leaks = slurp(tmp.file("tv/leak_points.csv"));
    REQUIRE(leaks == "sample\n");
}

TEST_CASE("align subcommand writes the aligned store and offsets", "[cli]") {
    TempDir tmp;
    scakit::Config c = scakit::Config::parse_string(kCampaign);
    c.set("leak.jitter_max", "4");
    c.set("n_traces", "64");
    write_file(tmp.file("campaign.cfg"), c.to_string());
    REQUIRE(run("simulate --config " + tmp.file("campaign.cfg") + " --out " + tmp.file("sim")) ==
            0);

    scakit::TraceStore in(tmp.file("sim/traces.bct"));
    const std::size_t len = in.trace_length();
    scakit::Config a;
    a.set("window.first", "4");
    a.set("window.last", std::to_string(len - 4));
    a.set("max_shift", "4");
    a.set("reference", "trace");
    write_file(tmp.file("align.cfg"), a.to_string());

    REQUIRE(run("align --in " + tmp.file("sim/traces.bct") + " --config " +
                tmp.file("align.cfg") + " --out " + tmp.file("al")) == 0);
    REQUIRE(fs::exists(tmp.file("al/aligned.bct")));
    const std::string offsets = slurp(tmp.file("al/offsets.csv"));
    REQUIRE(offsets.rfind("trace_id,offset,flag\n", 0) == 0);
    scakit::TraceStore out(tmp.file("al/aligned.bct"));
    REQUIRE(out.size() == in.size());
}

TEST_CASE("repeat runs are byte-identical", "[cli]") {
    TempDir tmp;
    write_file(tmp.file("campaign.cfg"), kCampaign);
    REQUIRE(run("simulate --config " + tmp.file("campaign.cfg") + " --out " + tmp.file("a") +
                " --workers 1") == 0);
    REQUIRE(run("simulate --config " + tmp.file("campaign.cfg") + " --out " + tmp.file("b") +
                " --workers 3") == 0);
    REQUIRE(slurp(tmp.file("a/traces.bct")) == slurp(tmp.file("b/traces.bct")));
    REQUIRE(slurp(tmp.file("a/groundtruth.cfg")) == slurp(tmp.file("b/groundtruth.cfg")));

    // a different seed changes the store
    REQUIRE(run("simulate --config " + tmp.file("campaign.cfg") + " --out " + tmp.file("c") +
                " --seed 777") == 0);
    REQUIRE(slurp(tmp.file("a/traces.bct")) != slurp(tmp.file("c/traces.bct")));
}

TEST_CASE("exit codes distinguish failure classes", "[cli]") {
    TempDir tmp;
    // 2: config parse error
    write_file(tmp.file("bad.cfg"), "mode attack\n");
    REQUIRE(run("simulate --config " + tmp.file("bad.cfg") + " --out " + tmp.file("x")) == 2);
    // 3: missing input file
    REQUIRE(run("simulate --config " + tmp.file("absent.cfg") + " --out " + tmp.file("x")) == 3);
    // 4: malformed store
    write_file(tmp.file("junk.bct"), "this is not a trace store at all");
    REQUIRE(run("tvla --fixed " + tmp.file("junk.bct") + " --random " + tmp.file("junk.bct") +
                " --out " + tmp.file("x")) == 4);
    // 2: CLI flag errors
    REQUIRE(run("simulate") == 2);
    REQUIRE(run("definitely-not-a-subcommand") == 2);
}

TEST_CASE("convert subcommand round-trips CSV", "[cli]") {
    TempDir tmp;
    write_file(tmp.file("t.csv"), "1,2,3\n4,5,6\n");
    REQUIRE(run("convert --csv " + tmp.file("t.csv") + " --store " + tmp.file("t.bct") +
                " --to-store") == 0);
    REQUIRE(run("convert --csv " + tmp.file("back.csv") + " --store " + tmp.file("t.bct")) == 0);
    scakit::TraceStore s(tmp.file("t.bct"));
    REQUIRE(s.size() == 2);
    REQUIRE(slurp(tmp.file("back.csv")) == "1,2,3\n4,5,6\n");
}
