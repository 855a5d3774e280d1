// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include <cstdint>
#include <string_view>

namespace hallucsr::rng {

// Seed for the named substream `name` (and optional index) of a root seed.
// Every consumer of randomness derives its own stream this way, so streams
// never depend on how much another one was consumed.
inline uint64_t substream_seed(uint64_t root, std::string_view name, uint64_t index = 0) {
    uint64_t h = 1469598103934665603ULL; // FNV-1a
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    auto mix = [](uint64_t x) { // splitmix64 finaliser
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    return mix(mix(mix(root) ^ h) ^ index);
}

inline at::Generator torch_generator(uint64_t seed) {
    return at::make_generator<at::CPUGeneratorImpl>(seed);
}

inline at::Generator torch_generator(uint64_t root, std::string_view name, uint64_t index = 0) {
    return torch_generator(substream_seed(root, name, index));
}

} // namespace hallucsr::rng
