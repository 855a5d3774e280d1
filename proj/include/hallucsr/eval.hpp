// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hallucsr/data.hpp"
#include "hallucsr/nets.hpp"

#include <torch/torch.h>

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace hallucsr {

struct SrSample {
    torch::Tensor image;    // (N, C, H, W)
    torch::Tensor gradient; // (N, 1, H, W)
};

// Anything that maps (lr batch, one noise vector per item) to an HR sample.
using SrModel = std::function<SrSample(const torch::Tensor& lr, const torch::Tensor& z)>;

// Final-scale output of a generator, evaluated without autograd.
SrModel as_sr_model(Generator generator);

namespace eval {

inline constexpr double kPsnrCap = 99.0;

struct MetricsReport {
    double psnr = 0.0;                       // dB
    double ssim = 0.0;
    double perceptual = 0.0;                 // feature distance of the configured extractor (not LPIPS)
    double consistency_violation_rate = 0.0; // fraction
    double diversity = 0.0;

    nlohmann::json to_json() const;
};

// 10 log10(L^2 / MSE) with L = 2, capped at kPsnrCap (the value for MSE = 0).
double psnr(const torch::Tensor& a, const torch::Tensor& b);

// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), valid positions only,
// C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L = 2, averaged over channels and
// batch items. Throws DimensionError if either side is below 11.
double ssim(const torch::Tensor& a, const torch::Tensor& b);

// Same quantity as the perceptual training loss, as a double.
double perceptual_distance(const torch::Tensor& a, const torch::Tensor& b, FeatureExtractorImpl& extractor);

// Fraction of (sample, pixel, channel) triples with |DS(I_z) - lr| >= epsilon,
// over every z in z_samples (each a (noise_dim) vector applied to all items).
double consistency_violation_rate(const SrModel& model, const torch::Tensor& lr,
                                  const std::vector<torch::Tensor>& z_samples, double epsilon);

// Mean over unordered pairs of the mean absolute difference between the
// gradient maps produced for each z. Needs at least two samples.
double diversity_score(const SrModel& model, const torch::Tensor& lr, const std::vector<torch::Tensor>& z_samples);

// One row per sample: [nearest-upscaled LR | ground truth | SR (z = 0) |
// z_count hallucinations]. Returns the (C, rows * H, (3 + z_count) * W) grid
// and writes it as PNG when out_path is non-empty.
torch::Tensor emit_grid(const SrModel& model, const Dataset& samples, int64_t noise_dim, int64_t z_count,
                        uint64_t seed, const std::string& out_path);

// noise_dim-vectors drawn from N(0, 1) with the given seed.
std::vector<torch::Tensor> sample_noise(int64_t count, int64_t noise_dim, uint64_t seed);

} // namespace eval
} // namespace hallucsr
