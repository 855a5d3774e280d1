// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hallucsr/training.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hallucsr {

struct DataConfig {
    std::string source = "synthetic"; // "synthetic" or a directory of PNG/JPEG files
    int64_t synthetic_count = 8;
    double train_fraction = 0.75;

    bool operator==(const DataConfig&) const = default;
};

// Everything one invocation needs. The default value is the desk-scale
// synthetic smoke run.
struct RunConfig {
    GeneratorConfig model;
    ExtractorConfig extractor;
    TrainConfig train;
    DataConfig data;
    std::string out_dir = "hallucsr_out";
    int64_t threads = 1;
    int64_t grid_z_count = 4;
    int64_t eval_z_count = 8;

    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

// TOML subset: [section] headers, key = value lines, # comments. Values are
// integers, floats, booleans, double-quoted strings or flat integer arrays.
//
//   [model]     lr_size scale_factor base_channels min_channels
//               num_residual_blocks disc_residual_blocks noise_dim
//               image_channels leak residual_norm
//   [extractor] seed stage_widths leak weights_path
//   [loss]      gamma beta alpha tau epsilon r1_coeff
//   [train]     lr_generator lr_discriminator adam_beta1 adam_beta2
//               batch_size total_steps seed checkpoint_every
//   [data]      source synthetic_count train_fraction
//   [run]       out_dir threads grid_z_count eval_z_count
namespace config {

// Throws ConfigError naming the line on syntax errors or unknown keys.
RunConfig parse_toml(const std::string& text);
// Same, starting from `base` instead of the built-in defaults.
RunConfig parse_toml(const std::string& text, const RunConfig& base);
std::string to_toml(const RunConfig& config);

RunConfig load(const std::filesystem::path& path, const RunConfig& base = {});
void save(const std::filesystem::path& path, const RunConfig& config);

// Set one field from its dotted name ("train.seed") and a TOML value literal.
void apply_override(RunConfig& config, const std::string& dotted_key, const std::string& value);

std::vector<std::string> known_keys();

} // namespace config
} // namespace hallucsr
