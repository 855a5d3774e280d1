// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

// Drives the built command-line binary end to end.

#include "hallucsr/data.hpp"
#include "hallucsr/image_io.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "hallucsr_test_cli";

struct Result {
    int code;
    std::string err;
};

Result run(const std::string& args) {
    const auto err_file = kRoot / "stderr.txt";
    const std::string cmd = std::string("\"") + HALLUCSR_CLI + "\" " + args + " > /dev/null 2> \"" +
                            err_file.string() + "\"";
    const int status = std::system(cmd.c_str());
    std::ifstream in(err_file);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small enough to train a few steps in well under a second each.
fs::path write_desk_config() {
    fs::create_directories(kRoot);
    auto path = kRoot / "desk.toml";
    std::ofstream f(path);
    f << "[model]\nscale_factor = 4\nbase_channels = 8\nmin_channels = 4\nnum_residual_blocks = 1\n"
         "disc_residual_blocks = 1\nnoise_dim = 4\n"
         "[extractor]\nstage_widths = [4, 8]\n"
         "[train]\nbatch_size = 2\ntotal_steps = 4\n"
         "[data]\nsynthetic_count = 4\n"
         "[run]\ngrid_z_count = 2\neval_z_count = 3\n";
    return path;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

void reset_root() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
}

} // namespace

TEST_CASE("train writes the run artefacts and is deterministic", "[cli]") {
    reset_root();
    auto cfg = write_desk_config();
    auto a = kRoot / "a", b = kRoot / "b", c = kRoot / "c";
    REQUIRE(run("train --quiet --config " + quoted(cfg) + " --seed 7 --out " + quoted(a)).code == 0);
    REQUIRE(run("train --quiet --config " + quoted(cfg) + " --seed 7 --out " + quoted(b)).code == 0);
    REQUIRE(run("train --quiet --config " + quoted(cfg) + " --seed 8 --out " + quoted(c)).code == 0);
    for (auto name : {"config.toml", "metrics.csv", "checkpoint.hsr", "grid.png"}) CHECK(fs::exists(a / name));
    CHECK(!fs::exists(a / ".hallucsr.lock"));
    CHECK(read_file(a / "metrics.csv") == read_file(b / "metrics.csv"));
    CHECK(read_file(a / "metrics.csv") != read_file(c / "metrics.csv"));
    CHECK(read_file(a / "config.toml").find("seed = 7") != std::string::npos);

    // Rerunning into the same directory starts a fresh log.
    REQUIRE(run("train --quiet --config " + quoted(cfg) + " --seed 7 --out " + quoted(a)).code == 0);
    CHECK(read_file(a / "metrics.csv") == read_file(b / "metrics.csv"));
}

TEST_CASE("train --resume continues an interrupted run exactly", "[cli]") {
    reset_root();
    auto cfg = write_desk_config();
    auto full = kRoot / "full", part = kRoot / "part";
    REQUIRE(run("train --quiet --config " + quoted(cfg) + " --steps 4 --out " + quoted(full)).code == 0);
    REQUIRE(run("train --quiet --config " + quoted(cfg) + " --steps 2 --out " + quoted(part)).code == 0);
    REQUIRE(run("train --quiet --resume --config " + quoted(cfg) + " --steps 4 --out " + quoted(part)).code == 0);
    CHECK(read_file(full / "metrics.csv") == read_file(part / "metrics.csv"));
    CHECK(read_file(full / "checkpoint.hsr") != "");
}

TEST_CASE("train reports bad inputs on one line", "[cli]") {
    reset_root();
    auto cfg = write_desk_config();
    auto missing = kRoot / "no_such_dir";
    auto r = run("train --quiet --config " + quoted(cfg) + " --set data.source='\"" + missing.string() +
                 "\"' --out " + quoted(kRoot / "x"));
    CHECK(r.code != 0);
    CHECK(r.err.find(missing.string()) != std::string::npos);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

    r = run("train --quiet --config " + quoted(cfg) + " --set loss.alpha=-1 --out " + quoted(kRoot / "x"));
    CHECK(r.code != 0);
    r = run("train --quiet --set nope.key=1");
    CHECK(r.code != 0);

    // A held lock refuses a second writer.
    fs::create_directories(kRoot / "locked");
    std::ofstream(kRoot / "locked" / ".hallucsr.lock") << "1";
    r = run("train --quiet --config " + quoted(cfg) + " --out " + quoted(kRoot / "locked"));
    CHECK(r.code != 0);
    CHECK(!fs::exists(kRoot / "locked" / "checkpoint.hsr"));
}

TEST_CASE("eval writes a complete, deterministic report", "[cli]") {
    reset_root();
    auto cfg = write_desk_config();
    auto dir = kRoot / "run";
    REQUIRE(run("train --quiet --config " + quoted(cfg) + " --out " + quoted(dir)).code == 0);
    auto ckpt = quoted(dir / "checkpoint.hsr");
    REQUIRE(run("eval --checkpoint " + ckpt + " --seed 3 --out " + quoted(kRoot / "e1.json")).code == 0);
    REQUIRE(run("eval --checkpoint " + ckpt + " --seed 3 --out " + quoted(kRoot / "e2.json")).code == 0);
    REQUIRE(run("eval --checkpoint " + ckpt + " --split all --out " + quoted(kRoot / "e3.json")).code == 0);
    auto j = nlohmann::json::parse(read_file(kRoot / "e1.json"));
    for (auto key : {"psnr", "ssim", "perceptual", "consistency_violation_rate", "diversity"}) {
        INFO(key);
        REQUIRE(j.contains(key));
        CHECK(j[key].is_number());
    }
    CHECK(j["step"] == 4);
    CHECK(j["num_samples"] == 1);
    CHECK(nlohmann::json::parse(read_file(kRoot / "e3.json"))["num_samples"] == 4);
    CHECK(read_file(kRoot / "e1.json") == read_file(kRoot / "e2.json"));

    // Evaluate against an image directory instead of the run's own data.
    auto images = kRoot / "images";
    fs::create_directories(images);
    auto ds = hallucsr::data::synth_dataset(3, 16, 4, 1);
    for (size_t i = 0; i < ds.size(); ++i) {
        hallucsr::image_io::write_png((images / ("i" + std::to_string(i) + ".png")).string(), ds[i].hr);
    }
    REQUIRE(run("eval --checkpoint " + ckpt + " --split all --data " + quoted(images) + " --out " +
                quoted(kRoot / "e4.json"))
                .code == 0);
    CHECK(nlohmann::json::parse(read_file(kRoot / "e4.json"))["num_samples"] == 3);

    std::ofstream(kRoot / "bad.hsr") << "HSRARCH1garbage";
    auto r = run("eval --checkpoint " + quoted(kRoot / "bad.hsr"));
    CHECK(r.code != 0);
    CHECK(!r.err.empty());
}

TEST_CASE("hallucinate emits the requested images", "[cli]") {
    reset_root();
    auto cfg = write_desk_config();
    auto dir = kRoot / "run";
    REQUIRE(run("train --quiet --config " + quoted(cfg) + " --out " + quoted(dir)).code == 0);
    auto ckpt = quoted(dir / "checkpoint.hsr");
    auto input = kRoot / "lr.png";
    hallucsr::image_io::write_png(input.string(), hallucsr::data::synth_dataset(1, 16, 4, 2)[0].lr);

    auto count_pngs = [](const fs::path& d) {
        int n = 0;
        for (auto& e : fs::directory_iterator(d)) n += e.path().extension() == ".png";
        return n;
    };

    REQUIRE(run("hallucinate --checkpoint " + ckpt + " --z-count 0 --out " + quoted(kRoot / "h0") + " " +
                quoted(input))
                .code == 0);
    CHECK(count_pngs(kRoot / "h0") == 1);
    CHECK(fs::exists(kRoot / "h0" / "sr.png"));

    REQUIRE(run("hallucinate --checkpoint " + ckpt + " --z-count 4 --seed 5 --out " + quoted(kRoot / "h4") + " " +
                quoted(input))
                .code == 0);
    REQUIRE(run("hallucinate --checkpoint " + ckpt + " --z-count 4 --seed 5 --out " + quoted(kRoot / "h4b") + " " +
                quoted(input))
                .code == 0);
    CHECK(count_pngs(kRoot / "h4") == 6);
    CHECK(fs::exists(kRoot / "h4" / "grid.png"));
    for (auto name : {"sr.png", "halluc_000.png", "halluc_003.png", "grid.png"}) {
        CHECK(read_file(kRoot / "h4" / name) == read_file(kRoot / "h4b" / name));
    }

    std::ofstream(kRoot / "broken.png") << "not a png";
    auto r = run("hallucinate --checkpoint " + ckpt + " --out " + quoted(kRoot / "hx") + " " +
                 quoted(kRoot / "broken.png"));
    CHECK(r.code != 0);
    CHECK(!r.err.empty());
}

TEST_CASE("usage errors exit nonzero", "[cli]") {
    reset_root();
    CHECK(run("").code != 0);
    CHECK(run("frobnicate").code != 0);
    CHECK(run("eval").code != 0);
    CHECK(run("train --config " + quoted(kRoot / "missing.toml")).code != 0);
}
