// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <json.hpp>

#include <map>
#include <string>

namespace hallucsr {

// Named-array container used for checkpoints and extractor weights.
//
// Layout (little-endian):
//   bytes 0..7   magic "HSRARCH1"
//   bytes 8..15  uint64 length L of the JSON header
//   next L bytes JSON: {"meta": {...},
//                       "arrays": [{"name", "dtype", "shape", "offset", "nbytes"}],
//                       "blobs":  [{"name", "offset", "nbytes"}]}
//   payload      raw contiguous array data and blobs; offsets are relative to
//                the start of the payload.
// dtype is one of "float32", "float64", "int64", "uint8".
struct Archive {
    nlohmann::json meta = nlohmann::json::object();
    std::map<std::string, torch::Tensor> arrays;
    std::map<std::string, std::string> blobs;
};

std::string serialize_archive(const Archive& archive);
Archive parse_archive(const std::string& bytes);

// Atomic write: goes to a temporary sibling first, then renamed.
void write_archive(const std::string& path, const Archive& archive);
Archive read_archive(const std::string& path);

} // namespace hallucsr
