// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/archive.hpp"
#include "hallucsr/errors.hpp"
#include "hallucsr/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>

using namespace hallucsr;

namespace {

Archive sample_archive() {
    auto gen = rng::torch_generator(31);
    Archive a;
    a.meta["step"] = 12;
    a.meta["name"] = "x";
    a.arrays["w.f32"] = torch::randn({3, 4, 2}, gen);
    a.arrays["w.f64"] = torch::randn({5}, gen, torch::kFloat64);
    a.arrays["idx"] = torch::arange(7, torch::kInt64);
    a.arrays["bytes"] = torch::arange(200, torch::kInt64).to(torch::kUInt8).view({10, 20});
    a.arrays["scalar"] = torch::tensor(3.5f);
    a.arrays["empty"] = torch::zeros({0, 3});
    a.blobs["opaque"] = std::string("a\0b\xff", 4);
    return a;
}

} // namespace

TEST_CASE("archive round-trips bit-exactly", "[archive]") {
    auto a = sample_archive();
    auto bytes = serialize_archive(a);
    CHECK(bytes.substr(0, 8) == "HSRARCH1");
    auto b = parse_archive(bytes);
    CHECK(b.meta == a.meta);
    CHECK(b.blobs == a.blobs);
    REQUIRE(b.arrays.size() == a.arrays.size());
    for (auto& [name, t] : a.arrays) {
        INFO(name);
        auto& u = b.arrays.at(name);
        CHECK(u.dtype() == t.dtype());
        CHECK(u.sizes() == t.sizes());
        CHECK(std::memcmp(u.contiguous().data_ptr(), t.contiguous().data_ptr(), t.nbytes()) == 0);
    }
    CHECK(serialize_archive(b) == bytes);
}

TEST_CASE("archive handles non-contiguous tensors", "[archive]") {
    Archive a;
    auto base = torch::arange(12, torch::kFloat32).view({3, 4});
    a.arrays["t"] = base.t();
    auto b = parse_archive(serialize_archive(a));
    CHECK(torch::equal(b.arrays.at("t"), base.t()));
}

TEST_CASE("archive rejects corrupted input", "[archive]") {
    auto bytes = serialize_archive(sample_archive());
    CHECK_THROWS_AS(parse_archive(""), FormatError);
    CHECK_THROWS_AS(parse_archive("HSRARCH2" + bytes.substr(8)), FormatError);
    CHECK_THROWS_AS(parse_archive(bytes.substr(0, bytes.size() - 1)), FormatError);
    CHECK_THROWS_AS(parse_archive(bytes.substr(0, 20)), FormatError);
    auto broken = bytes;
    broken[16] = '#';
    CHECK_THROWS_AS(parse_archive(broken), FormatError);

    Archive bad;
    bad.arrays["b"] = torch::zeros({2}, torch::kBool);
    CHECK_THROWS_AS(serialize_archive(bad), FormatError);
}

TEST_CASE("archive files are written atomically and read back", "[archive]") {
    auto dir = std::filesystem::temp_directory_path() / "hallucsr_test_archive";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    auto path = (dir / "a.hsr").string();
    auto a = sample_archive();
    write_archive(path, a);
    for (auto& entry : std::filesystem::directory_iterator(dir)) CHECK(entry.path().filename() == "a.hsr");
    auto b = read_archive(path);
    CHECK(serialize_archive(b) == serialize_archive(a));
    CHECK_THROWS_AS(read_archive((dir / "missing.hsr").string()), IoError);
    std::filesystem::remove_all(dir);
}
