// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/commands.hpp"
#include "hallucsr/config.hpp"
#include "hallucsr/errors.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace hallucsr;
namespace fs = std::filesystem;

namespace {

RunConfig unusual_config() {
    RunConfig c;
    c.model.lr_size = 8;
    c.model.scale_factor = 4;
    c.model.base_channels = 24;
    c.model.min_channels = 6;
    c.model.num_residual_blocks = 3;
    c.model.disc_residual_blocks = 5;
    c.model.noise_dim = 17;
    c.model.leak = 0.15;
    c.model.residual_norm = "instance";
    c.extractor.seed = 18446744073709551615ULL;
    c.extractor.stage_widths = {3, 5, 7};
    c.extractor.leak = 0.1;
    c.extractor.weights_path = "weights dir/ext \"v2\".hsr";
    c.train.weights = {1.5, 0.3, 0.0, 2.5, 0.25, 0.1 + 0.2};
    c.train.lr_generator = 3e-5;
    c.train.lr_discriminator = 1.0 / 3.0;
    c.train.adam_beta2 = 0.99;
    c.train.batch_size = 3;
    c.train.total_steps = 77;
    c.train.seed = 42;
    c.train.checkpoint_every = 10;
    c.data.source = "/tmp/images # not a comment";
    c.data.synthetic_count = 5;
    c.data.train_fraction = 0.6;
    c.out_dir = "out";
    c.threads = 2;
    c.grid_z_count = 0;
    c.eval_z_count = 3;
    return c;
}

} // namespace

TEST_CASE("default config is the valid desk-scale synthetic run", "[config]") {
    RunConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.data.source == "synthetic");
    CHECK(c.model.hr_size() == 32);
    CHECK(c.model.lr_size == 4);
    CHECK(c.model.num_residual_blocks == 8);
    CHECK(c.model.leak == 0.2);
    CHECK(c.train.weights.gamma == 10.0);
    CHECK(c.train.weights.beta == 0.1);
    CHECK(c.train.weights.alpha == 1.0);
    CHECK(c.train.weights.epsilon == 0.1);
    CHECK(config::parse_toml("") == c);
}

TEST_CASE("config round-trips losslessly", "[config][property]") {
    for (const auto& c : {RunConfig{}, unusual_config()}) {
        const auto text = config::to_toml(c);
        const auto parsed = config::parse_toml(text);
        CHECK(parsed == c);
        CHECK(config::to_toml(parsed) == text);
    }
}

TEST_CASE("config parsing", "[config]") {
    auto c = config::parse_toml(R"(
# comment
[train]
seed = 9          # trailing comment
lr_generator = 2e-4
[model]
scale_factor = 4
residual_norm = "instance"
[extractor]
stage_widths = [8, 16, 32]
[loss]
alpha = 0
)");
    CHECK(c.train.seed == 9);
    CHECK(c.train.lr_generator == 2e-4);
    CHECK(c.model.scale_factor == 4);
    CHECK(c.model.residual_norm == "instance");
    CHECK(c.extractor.stage_widths == std::vector<int64_t>{8, 16, 32});
    CHECK(c.train.weights.alpha == 0.0);
    CHECK(c.train.total_steps == RunConfig{}.train.total_steps);

    CHECK_THROWS_AS(config::parse_toml("[train]\nbogus = 1\n"), ConfigError);
    CHECK_THROWS_AS(config::parse_toml("[train]\nseed = \"x\"\n"), ConfigError);
    CHECK_THROWS_AS(config::parse_toml("[train]\nseed = -1\n"), ConfigError);
    CHECK_THROWS_AS(config::parse_toml("[train\n"), ConfigError);
    CHECK_THROWS_AS(config::parse_toml("seed 3\n"), ConfigError);
    CHECK_THROWS_AS(config::parse_toml("[data]\nsource = \"open\n"), ConfigError);
    CHECK_THROWS_AS(config::parse_toml("[extractor]\nstage_widths = [1, x]\n"), ConfigError);
    try {
        config::parse_toml("\n\n[model]\nnoise = 3\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
}

TEST_CASE("overrides and validation", "[config]") {
    RunConfig c;
    config::apply_override(c, "train.seed", "11");
    config::apply_override(c, "loss.alpha", "0.5");
    config::apply_override(c, "data.source", "\"imgs\"");
    CHECK(c.train.seed == 11);
    CHECK(c.train.weights.alpha == 0.5);
    CHECK(c.data.source == "imgs");
    CHECK_THROWS_AS(config::apply_override(c, "train.nope", "1"), ConfigError);
    CHECK_THROWS_AS(config::apply_override(c, "train.seed", "abc"), ConfigError);

    auto bad = c;
    bad.data.train_fraction = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.model.scale_factor = 3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.eval_z_count = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    for (const auto& key : config::known_keys()) {
        CHECK(key.find('.') != std::string::npos);
        CHECK(config::to_toml(c).find(key.substr(key.find('.') + 1) + " = ") != std::string::npos);
    }
}

TEST_CASE("config files save and load", "[config]") {
    auto dir = fs::temp_directory_path() / "hallucsr_test_config";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto c = unusual_config();
    config::save(dir / "c.toml", c);
    CHECK(config::load(dir / "c.toml") == c);
    CHECK_THROWS_AS(config::load(dir / "missing.toml"), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("config precedence: defaults, environment, file, overrides, flags", "[config]") {
    auto dir = fs::temp_directory_path() / "hallucsr_test_precedence";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "run.toml");
        f << "[train]\nseed = 5\ntotal_steps = 9\n[run]\nout_dir = \"from_file\"\n";
    }

    ::setenv(commands::kOutEnv, "from_env", 1);
    commands::TrainArgs args;
    CHECK(commands::resolve_config(args).out_dir == "from_env");

    args.config_path = dir / "run.toml";
    auto c = commands::resolve_config(args);
    CHECK(c.out_dir == "from_file");
    CHECK(c.train.seed == 5);
    CHECK(c.train.total_steps == 9);

    args.sets = {{"train.seed", "6"}, {"train.total_steps", "12"}};
    c = commands::resolve_config(args);
    CHECK(c.train.seed == 6);

    args.seed = 7;
    args.steps = 3;
    args.out_dir = "from_flag";
    c = commands::resolve_config(args);
    CHECK(c.train.seed == 7);
    CHECK(c.train.total_steps == 3);
    CHECK(c.out_dir == "from_flag");
    ::unsetenv(commands::kOutEnv);
    CHECK(commands::resolve_config(commands::TrainArgs{}).out_dir == RunConfig{}.out_dir);
    fs::remove_all(dir);
}
