// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

// Image-domain primitives. Images are NCHW tensors with values in [-1, 1];
// gradient maps and constraint maps are single-channel (N, 1, H, W).
namespace hallucsr::imagecore {

// Spacing of the 256-level colour grid {-1, -1 + 2/255, ..., 1}.
inline constexpr double kColorStep = 2.0 / 255.0;

// Largest value compute_gradient can produce for a [-1, 1] image.
inline constexpr double kMaxGradient = 2.8284271247461903;

// Per-pixel magnitude of central differences.
//
// g_x = I(x+1, y) - I(x-1, y), g_y = I(x, y+1) - I(x, y-1), each averaged over
// channels, then sqrt(g_x^2 + g_y^2). Borders use replicate padding so the
// output keeps the input size. Accepts (C, H, W) or (N, C, H, W); always
// returns (N, 1, H, W). Throws DimensionError if H or W is below 3.
torch::Tensor compute_gradient(const torch::Tensor& image);

// Area (block-mean) downscaling by an integer factor.
torch::Tensor downscale(const torch::Tensor& image, int64_t factor);

// Nearest-neighbour upscaling, used for display and the LR baseline.
torch::Tensor upscale_nearest(const torch::Tensor& image, int64_t factor);

// Snap every element to the nearest colour-grid value. Exact midpoints round
// away from zero (0 itself rounds up). Backward is the identity.
torch::Tensor round_colors(const torch::Tensor& image);

struct ConstraintMap {
    torch::Tensor data; // (N, 1, h, w), >= 0
    double epsilon = 0.1;
    static constexpr double r = kColorStep;
};

// F = max(|round(DS(fake_hr)) - lr| / r - epsilon, 0), evaluated per channel
// and averaged to one plane. Differentiable in fake_hr (straight-through
// through the rounding).
ConstraintMap constraint_map(const torch::Tensor& fake_hr, const torch::Tensor& lr, int64_t factor,
                             double epsilon);

// All-zero map, the conditioning used for real images.
ConstraintMap zero_constraint_map(const torch::Tensor& lr, double epsilon);

// Add a leading batch dimension to (C, H, W) tensors; 4D passes through.
torch::Tensor as_batch(const torch::Tensor& image);

} // namespace hallucsr::imagecore
