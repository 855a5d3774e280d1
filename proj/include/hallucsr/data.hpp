// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace hallucsr {

// lr is always downscale(hr, factor); pairs are never loaded independently.
struct PairedSample {
    torch::Tensor hr; // (C, H, W)
    torch::Tensor lr; // (C, H / factor, W / factor)
    std::string id;
};

using Dataset = std::vector<PairedSample>;

struct Batch {
    torch::Tensor lr; // (N, C, h, w)
    torch::Tensor hr; // (N, C, H, W)
};

namespace data {

// Every PNG/JPEG under root (non-recursive), sorted by file name, center-cropped,
// area-resized to hr_size and paired with its downscale. Unreadable files are
// skipped with a warning on stderr. Throws DatasetError if the directory is
// missing or nothing could be loaded.
Dataset load_dataset(const std::filesystem::path& root, int64_t hr_size, int64_t scale_factor);

// Procedural images (ramps, stripes, disks) snapped to the 8-bit colour grid.
Dataset synth_dataset(int64_t n, int64_t hr_size, int64_t scale_factor, uint64_t seed);

// Disjoint, exhaustive, seed-determined partition. Each part keeps the
// original order. Throws ConfigError unless 0 < train_fraction < 1.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, uint64_t seed);

// Rounds a (C, H, W) image to the 8-bit colour grid, then nudges pixels (one
// level each in all but degenerate blocks) until every factor x factor block
// mean is itself a grid level. The area downscale of the result therefore
// needs no rounding, so a ground-truth image is exactly consistent with its LR.
torch::Tensor snap_block_means(const torch::Tensor& image, int64_t factor);

// Snaps hr as above and pairs it with lr = downscale(hr, factor).
PairedSample make_pair(torch::Tensor hr, int64_t scale_factor, std::string id);

Batch make_batch(const Dataset& dataset, const std::vector<size_t>& indices);
Batch make_batch(const Dataset& dataset);

namespace patterns {

// (C, size, size) square wave of the given period along x (vertical bars).
torch::Tensor stripes(int64_t size, int64_t period, int64_t channels = 3, double low = -0.5, double high = 0.5);

} // namespace patterns

} // namespace data
} // namespace hallucsr
