// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/data.hpp"
#include "hallucsr/errors.hpp"
#include "hallucsr/image_io.hpp"
#include "hallucsr/imagecore.hpp"
#include "hallucsr/rng.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <filesystem>
#include <fstream>
#include <set>

using namespace hallucsr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

bool same_dataset(const Dataset& a, const Dataset& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].id != b[i].id || !torch::equal(a[i].hr, b[i].hr) || !torch::equal(a[i].lr, b[i].lr)) return false;
    }
    return true;
}

} // namespace

TEST_CASE("synth_dataset is seeded and well-formed", "[data]") {
    auto a = data::synth_dataset(8, 32, 8, 5);
    auto b = data::synth_dataset(8, 32, 8, 5);
    auto c = data::synth_dataset(8, 32, 8, 6);
    REQUIRE(a.size() == 8);
    CHECK(same_dataset(a, b));
    CHECK(!same_dataset(a, c));
    std::set<std::string> ids;
    for (auto& s : a) {
        ids.insert(s.id);
        CHECK(s.hr.sizes() == torch::IntArrayRef({3, 32, 32}));
        CHECK(s.lr.sizes() == torch::IntArrayRef({3, 4, 4}));
        CHECK(s.hr.scalar_type() == torch::kFloat32);
        CHECK(torch::equal(s.lr, imagecore::downscale(s.hr, 8).squeeze(0)));
        CHECK(torch::equal(imagecore::round_colors(s.hr), s.hr));
        CHECK(imagecore::compute_gradient(s.hr).max().item<double>() > 0.0);
    }
    CHECK(ids.size() == 8);
    CHECK_THROWS_AS(data::synth_dataset(0, 32, 8, 1), ConfigError);
    CHECK_THROWS_AS(data::synth_dataset(2, 30, 8, 1), ConfigError);
}

TEST_CASE("ground truth is exactly consistent with its LR", "[data][property]") {
    for (auto& s : data::synth_dataset(16, 32, 8, 7)) {
        auto f = imagecore::constraint_map(s.hr, s.lr, 8, 0.1);
        CHECK(f.data.abs().max().item<double>() == 0.0);
        auto drift = (imagecore::round_colors(s.lr) - s.lr).abs().max().item<double>();
        CHECK(drift <= 1e-6);
    }
}

TEST_CASE("snap_block_means moves block means onto the grid", "[data][property]") {
    auto gen = rng::torch_generator(41);
    for (int trial = 0; trial < 30; ++trial) {
        const int64_t f = int64_t{1} << (1 + trial % 3);
        auto img = torch::rand({3, 16, 16}, gen, torch::kFloat64) * 2 - 1;
        if (trial % 5 == 0) img = torch::full({3, 16, 16}, -1.0, torch::kFloat64);
        if (trial % 7 == 0) img.index_put_({0, 0, 0}, 1.0).index_put_({1}, -1.0);
        auto grid = imagecore::round_colors(img);
        auto snapped = data::snap_block_means(grid, f);
        CHECK(torch::equal(imagecore::round_colors(snapped), snapped));
        auto means = oracle::block_mean(oracle::from_tensor(snapped), int(f));
        for (double m : means.v) CHECK(std::abs(oracle::nearest_level(m) - m) <= 1e-6);
        // Pixels on an already-aligned image are left alone; otherwise at most
        // one level per pixel on these non-degenerate inputs.
        CHECK((snapped - grid).abs().max().item<double>() <= 2.0 / 255.0 + 1e-6);
    }
    auto aligned = imagecore::round_colors(torch::full({1, 4, 4}, 1.0 / 255.0));
    CHECK(torch::equal(data::snap_block_means(aligned, 2), aligned));
    CHECK_THROWS_AS(data::snap_block_means(torch::zeros({1, 6, 6}), 4), ShapeError);
}

TEST_CASE("snap_block_means handles blocks with little headroom", "[data]") {
    // One bright pixel in an otherwise black 8x8 block: the sum of levels is
    // 20, so the nearest multiple of 64 is 0 and the single pixel drops to 0.
    auto img = torch::full({1, 8, 8}, -1.0f);
    img[0][3][5] = 2.0f * 20 / 255 - 1;
    auto out = data::snap_block_means(img, 8);
    CHECK(out.max().item<double>() == -1.0);
}

TEST_CASE("stripe images have a periodic gradient map", "[data]") {
    for (int64_t period : {4, 6, 8}) {
        auto img = data::patterns::stripes(24, period);
        auto g = imagecore::compute_gradient(img)[0][0];
        auto expected = oracle::to_tensor(oracle::gradient(oracle::from_tensor(img)))[0][0];
        CHECK((g.to(torch::kFloat64) - expected).abs().max().item<double>() <= 1e-6);
        for (int64_t x = 1; x + period < 23; ++x) {
            CHECK(g[5][x].item<float>() == g[5][x + period].item<float>());
        }
        CHECK(g.max().item<double>() > 0.0);
    }
    CHECK_THROWS_AS(data::patterns::stripes(8, 1), ConfigError);
}

TEST_CASE("split is disjoint, exhaustive and seeded", "[data]") {
    auto ds = data::synth_dataset(10, 16, 4, 3);
    auto [train, test] = data::split(ds, 0.5, 9);
    CHECK(train.size() == 5);
    CHECK(test.size() == 5);
    std::set<std::string> ids;
    for (auto& s : train) ids.insert(s.id);
    for (auto& s : test) CHECK(ids.insert(s.id).second);
    CHECK(ids.size() == 10);

    auto [train2, test2] = data::split(ds, 0.5, 9);
    CHECK(same_dataset(train, train2));
    CHECK(same_dataset(test, test2));

    bool differs = false;
    for (uint64_t seed = 10; seed < 20 && !differs; ++seed) {
        differs = !same_dataset(data::split(ds, 0.5, seed).first, train);
    }
    CHECK(differs);

    for (double bad : {0.0, 1.0, -0.5, 1.5}) CHECK_THROWS_AS(data::split(ds, bad, 1), ConfigError);
    auto [a, b] = data::split(ds, 0.3, 2);
    CHECK(a.size() == 3);
    CHECK(b.size() == 7);
}

TEST_CASE("load_dataset reads, sorts and pairs images", "[data]") {
    TempDir dir("hallucsr_test_data");
    auto source = data::synth_dataset(10, 40, 8, 11);
    for (size_t i = 0; i < source.size(); ++i) {
        // Reverse-ordered names to check sorting; one JPEG, one non-square.
        auto name = "img_" + std::to_string(9 - i) + (i == 3 ? ".jpg" : ".png");
        auto img = source[i].hr;
        if (i == 0) img = img.narrow(2, 0, 32);
        if (i == 3) {
            auto hwc = image_io::to_bytes(img).permute({1, 2, 0}).contiguous();
            cv::Mat rgb(int(hwc.size(0)), int(hwc.size(1)), CV_8UC3, hwc.data_ptr<uint8_t>()), bgr;
            cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
            REQUIRE(cv::imwrite((dir.path / name).string(), bgr));
            continue;
        }
        image_io::write_png((dir.path / name).string(), img);
    }
    {
        std::ofstream junk(dir.path / "broken.png");
        junk << "not an image";
    }
    std::ofstream(dir.path / "notes.txt") << "ignored";

    auto ds = data::load_dataset(dir.path, 32, 8);
    REQUIRE(ds.size() == 10);
    for (size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds[i].id == "img_" + std::to_string(i) + (9 - i == 3 ? ".jpg" : ".png"));
        CHECK(ds[i].hr.sizes() == torch::IntArrayRef({3, 32, 32}));
        CHECK(ds[i].lr.sizes() == torch::IntArrayRef({3, 4, 4}));
        CHECK(torch::equal(ds[i].lr, imagecore::downscale(ds[i].hr, 8).squeeze(0)));
        CHECK(ds[i].hr.abs().max().item<double>() <= 1.0);
    }
    CHECK(same_dataset(ds, data::load_dataset(dir.path, 32, 8)));
}

TEST_CASE("load_dataset errors name the path", "[data]") {
    TempDir dir("hallucsr_test_data_empty");
    auto missing = dir.path / "nope";
    try {
        data::load_dataset(missing, 32, 8);
        FAIL("expected DatasetError");
    } catch (const DatasetError& e) {
        CHECK(std::string(e.what()).find(missing.string()) != std::string::npos);
    }
    CHECK_THROWS_AS(data::load_dataset(dir.path, 32, 8), DatasetError);
    CHECK_THROWS_AS(data::load_dataset(dir.path, 30, 8), ConfigError);
}

TEST_CASE("make_batch stacks samples", "[data]") {
    auto ds = data::synth_dataset(4, 16, 4, 1);
    auto b = data::make_batch(ds, {2, 0, 2});
    CHECK(b.lr.sizes() == torch::IntArrayRef({3, 3, 4, 4}));
    CHECK(b.hr.sizes() == torch::IntArrayRef({3, 3, 16, 16}));
    CHECK(torch::equal(b.hr[0], ds[2].hr));
    CHECK(torch::equal(b.hr[1], ds[0].hr));
    CHECK(data::make_batch(ds).hr.size(0) == 4);
    CHECK_THROWS_AS(data::make_batch(ds, {}), DatasetError);
}
