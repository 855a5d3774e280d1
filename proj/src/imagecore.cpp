// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/imagecore.hpp"

#include "hallucsr/errors.hpp"

#include <string>

namespace hallucsr::imagecore {

namespace {

using torch::indexing::None;
using torch::indexing::Slice;

std::string shape_str(const torch::Tensor& t) {
    std::string s = "(";
    for (int64_t i = 0; i < t.dim(); ++i) {
        s += (i ? ", " : "") + std::to_string(t.size(i));
    }
    return s + ")";
}

torch::Tensor snap_to_grid(const torch::Tensor& x) {
    // Grid points sit at half-integers of t = 127.5 x.
    auto t = x * 127.5;
    auto f = torch::floor(t);
    auto tie = t == f;
    auto tie_value = torch::where(t >= 0, t + 0.5, t - 0.5);
    auto half = torch::where(tie, tie_value, f + 0.5).clamp(-127.5, 127.5);
    // Same arithmetic as the 8-bit decode, so grid values agree bit for bit.
    auto level = half + 127.5;
    return level.mul(2.0).div(255.0).sub(1.0);
}

class RoundStraightThrough : public torch::autograd::Function<RoundStraightThrough> {
public:
    static torch::Tensor forward(torch::autograd::AutogradContext*, const torch::Tensor& x) {
        return snap_to_grid(x);
    }
    static torch::autograd::tensor_list backward(torch::autograd::AutogradContext*,
                                                 torch::autograd::tensor_list grad_out) {
        return {grad_out[0]};
    }
};

} // namespace

torch::Tensor as_batch(const torch::Tensor& image) {
    if (image.dim() == 3) return image.unsqueeze(0);
    if (image.dim() == 4) return image;
    throw ShapeError("expected a (C,H,W) or (N,C,H,W) image, got " + shape_str(image));
}

torch::Tensor compute_gradient(const torch::Tensor& image) {
    auto x = as_batch(image);
    if (x.size(2) < 3 || x.size(3) < 3) {
        throw DimensionError("compute_gradient needs at least 3x3 pixels, got " + shape_str(x));
    }
    auto p = torch::replication_pad2d(x, {1, 1, 1, 1});
    auto gx = p.index({Slice(), Slice(), Slice(1, -1), Slice(2, None)}) -
              p.index({Slice(), Slice(), Slice(1, -1), Slice(None, -2)});
    auto gy = p.index({Slice(), Slice(), Slice(2, None), Slice(1, -1)}) -
              p.index({Slice(), Slice(), Slice(None, -2), Slice(1, -1)});
    gx = gx.mean(1, /*keepdim=*/true);
    gy = gy.mean(1, /*keepdim=*/true);
    return torch::sqrt(gx * gx + gy * gy);
}

torch::Tensor downscale(const torch::Tensor& image, int64_t factor) {
    auto x = as_batch(image);
    if (factor < 1) throw ShapeError("downscale factor must be positive");
    if (x.size(2) % factor != 0 || x.size(3) % factor != 0) {
        throw ShapeError("image " + shape_str(x) + " is not divisible by factor " + std::to_string(factor));
    }
    if (factor == 1) return x;
    return torch::avg_pool2d(x, {factor, factor});
}

torch::Tensor upscale_nearest(const torch::Tensor& image, int64_t factor) {
    auto x = as_batch(image);
    if (factor < 1) throw ShapeError("upscale factor must be positive");
    if (factor == 1) return x;
    return x.repeat_interleave(factor, 2).repeat_interleave(factor, 3);
}

torch::Tensor round_colors(const torch::Tensor& image) {
    return RoundStraightThrough::apply(image);
}

ConstraintMap constraint_map(const torch::Tensor& fake_hr, const torch::Tensor& lr, int64_t factor,
                             double epsilon) {
    auto fake = as_batch(fake_hr);
    auto low = as_batch(lr);
    if (fake.size(2) % factor != 0 || fake.size(3) % factor != 0) {
        throw ShapeError("fake image " + shape_str(fake) + " is not divisible by factor " +
                         std::to_string(factor));
    }
    auto ds = downscale(fake, factor);
    if (ds.sizes() != low.sizes()) {
        throw ShapeError("downscaled fake " + shape_str(ds) + " does not match lr " + shape_str(low));
    }
    auto level_diff = (round_colors(ds) - low).abs() / ConstraintMap::r;
    auto f = torch::relu(level_diff - epsilon).mean(1, /*keepdim=*/true);
    return {f, epsilon};
}

ConstraintMap zero_constraint_map(const torch::Tensor& lr, double epsilon) {
    auto low = as_batch(lr);
    return {torch::zeros({low.size(0), 1, low.size(2), low.size(3)}, low.options()), epsilon};
}

} // namespace hallucsr::imagecore
