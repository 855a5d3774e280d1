// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/data.hpp"

#include "hallucsr/errors.hpp"
#include "hallucsr/image_io.hpp"
#include "hallucsr/imagecore.hpp"
#include "hallucsr/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

namespace hallucsr::data {

namespace {

bool is_image_file(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

torch::Tensor coords(int64_t size) {
    return torch::arange(size, torch::kFloat64) / static_cast<double>(size);
}

torch::Tensor random_color(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    return torch::tensor({u(gen), u(gen), u(gen)}, torch::kFloat64).view({3, 1, 1});
}

torch::Tensor synth_image(int64_t size, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double pi = std::acos(-1.0);

    auto ys = coords(size).view({1, size, 1});
    auto xs = coords(size).view({1, 1, size});

    // Background ramp in a random direction.
    const double angle = 2.0 * pi * unit(gen);
    auto t = (xs * std::cos(angle) + ys * std::sin(angle));
    t = (t - t.min()) / (t.max() - t.min() + 1e-12);
    auto a = random_color(gen);
    auto b = random_color(gen);
    auto img = a + (b - a) * t;

    if (unit(gen) < 0.6) {
        const int64_t period = 4 + 2 * static_cast<int64_t>(unit(gen) * 4.0);
        auto bars = patterns::stripes(size, period, 1, -0.25, 0.25).to(torch::kFloat64);
        if (unit(gen) < 0.5) bars = bars.transpose(1, 2);
        img = img + bars;
    }

    const int disks = 1 + static_cast<int>(unit(gen) * 3.0);
    for (int d = 0; d < disks; ++d) {
        const double cx = unit(gen), cy = unit(gen);
        const double radius = 0.12 + 0.22 * unit(gen);
        auto inside = ((xs - cx).pow(2) + (ys - cy).pow(2)) < radius * radius;
        img = torch::where(inside.expand({3, size, size}), random_color(gen).expand({3, size, size}), img);
    }

    auto snapped = imagecore::round_colors(img.clamp(-1.0, 1.0));
    return snapped.to(torch::kFloat32);
}

} // namespace

torch::Tensor snap_block_means(const torch::Tensor& image, int64_t factor) {
    if (image.dim() != 3 || image.size(1) % factor != 0 || image.size(2) % factor != 0) {
        throw ShapeError("snap_block_means: expected (C, H, W) divisible by the factor");
    }
    auto levels = image.to(torch::kFloat64).add(1.0).mul(127.5).round().clamp(0, 255).to(torch::kInt64).contiguous();
    auto acc = levels.accessor<int64_t, 3>();
    const int64_t area = factor * factor;
    // Visit block pixels with an odd stride so adjustments spread out.
    int64_t stride = area / 2 + 1;
    while (std::gcd(stride, area) != 1) ++stride;

    for (int64_t c = 0; c < levels.size(0); ++c) {
        for (int64_t by = 0; by < levels.size(1); by += factor) {
            for (int64_t bx = 0; bx < levels.size(2); bx += factor) {
                int64_t sum = 0;
                for (int64_t i = 0; i < area; ++i) sum += acc[c][by + i / factor][bx + i % factor];
                const int64_t rem = sum % area;
                if (rem == 0) continue;
                // Move the sum to the nearer multiple of the block area. There is
                // always room: going down needs rem <= sum units, going up needs
                // area - rem <= 255 * area - sum.
                const int64_t dir = rem * 2 <= area ? -1 : 1;
                int64_t todo = dir < 0 ? rem : area - rem;
                while (todo > 0) {
                    for (int64_t k = 0; k < area && todo > 0; ++k) {
                        const int64_t i = (k * stride) % area;
                        auto v = acc[c][by + i / factor][bx + i % factor];
                        if (v + dir < 0 || v + dir > 255) continue;
                        acc[c][by + i / factor][bx + i % factor] = v + dir;
                        --todo;
                    }
                }
            }
        }
    }
    // Same arithmetic as decoding an 8-bit image.
    return levels.to(image.scalar_type()).mul(2.0).div(255.0).sub(1.0);
}

PairedSample make_pair(torch::Tensor hr, int64_t scale_factor, std::string id) {
    hr = snap_block_means(hr, scale_factor);
    auto lr = imagecore::downscale(hr, scale_factor).squeeze(0);
    return {std::move(hr), std::move(lr), std::move(id)};
}

Dataset load_dataset(const std::filesystem::path& root, int64_t hr_size, int64_t scale_factor) {
    if (scale_factor < 1 || hr_size % scale_factor != 0) {
        throw ConfigError("hr_size " + std::to_string(hr_size) + " is not divisible by scale factor " +
                          std::to_string(scale_factor));
    }
    std::error_code ec;
    if (!std::filesystem::is_directory(root, ec)) {
        throw DatasetError("dataset directory not found: " + root.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });

    Dataset out;
    for (const auto& f : files) {
        try {
            out.push_back(make_pair(image_io::read_square_image(f.string(), hr_size), scale_factor,
                                    f.filename().string()));
        } catch (const IoError& e) {
            std::cerr << "warning: skipping " << f.string() << ": " << e.what() << "\n";
        }
    }
    if (out.empty()) throw DatasetError("no decodable images in " + root.string());
    return out;
}

Dataset synth_dataset(int64_t n, int64_t hr_size, int64_t scale_factor, uint64_t seed) {
    if (n <= 0) throw ConfigError("synthetic dataset size must be positive");
    if (scale_factor < 1 || hr_size % scale_factor != 0) {
        throw ConfigError("hr_size must be divisible by the scale factor");
    }
    Dataset out;
    out.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        std::mt19937_64 gen(rng::substream_seed(seed, "synth", static_cast<uint64_t>(i)));
        char id[32];
        std::snprintf(id, sizeof id, "synth_%05lld", static_cast<long long>(i));
        out.push_back(make_pair(synth_image(hr_size, gen), scale_factor, id));
    }
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    }
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 gen(rng::substream_seed(seed, "split"));
    std::shuffle(order.begin(), order.end(), gen);

    const auto n_train = static_cast<size_t>(std::llround(train_fraction * static_cast<double>(dataset.size())));
    std::vector<size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    std::pair<Dataset, Dataset> out;
    for (auto i : train_idx) out.first.push_back(dataset[i]);
    for (auto i : test_idx) out.second.push_back(dataset[i]);
    return out;
}

Batch make_batch(const Dataset& dataset, const std::vector<size_t>& indices) {
    if (indices.empty()) throw DatasetError("empty batch");
    std::vector<torch::Tensor> lr, hr;
    for (auto i : indices) {
        lr.push_back(dataset.at(i).lr);
        hr.push_back(dataset.at(i).hr);
    }
    return {torch::stack(lr), torch::stack(hr)};
}

Batch make_batch(const Dataset& dataset) {
    std::vector<size_t> all(dataset.size());
    std::iota(all.begin(), all.end(), size_t{0});
    return make_batch(dataset, all);
}

namespace patterns {

torch::Tensor stripes(int64_t size, int64_t period, int64_t channels, double low, double high) {
    if (period < 2) throw ConfigError("stripe period must be at least 2");
    auto x = torch::arange(size, torch::kInt64);
    auto on = torch::remainder(x, period) < (period / 2);
    auto row = torch::where(on, torch::full({size}, high, torch::kFloat32), torch::full({size}, low, torch::kFloat32));
    return row.view({1, 1, size}).expand({channels, size, size}).contiguous();
}

} // namespace patterns

} // namespace hallucsr::data
