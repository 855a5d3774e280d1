// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/losses.hpp"

#include "hallucsr/errors.hpp"
#include "hallucsr/nets.hpp"

#include <string>

namespace hallucsr {

void LossWeights::validate() const {
    if (gamma < 0 || beta < 0 || alpha < 0 || epsilon < 0 || r1_coeff < 0) {
        throw ConfigError("loss weights must be non-negative");
    }
    if (!(tau > 0)) throw ConfigError("tau must be positive");
}

namespace losses {

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.sizes() != b.sizes()) {
        throw ShapeError(std::string(what) + ": shape mismatch");
    }
}

void require_finite(const torch::Tensor& t, const char* what) {
    if (!torch::isfinite(t).all().item<bool>()) {
        throw NonFiniteError(std::string(what) + ": non-finite logits");
    }
}

} // namespace

torch::Tensor perceptual_loss(const torch::Tensor& sr, const torch::Tensor& hr, FeatureExtractorImpl& extractor) {
    require_same_shape(sr, hr, "perceptual_loss");
    auto fs = extractor.forward(sr);
    auto fh = extractor.forward(hr);
    auto total = torch::zeros({}, sr.options());
    for (size_t i = 0; i < fs.size(); ++i) {
        total = total + (fs[i] - fh[i]).abs().mean();
    }
    return total;
}

torch::Tensor gradient_recon_loss(const torch::Tensor& g_sr, const torch::Tensor& g_hr) {
    require_same_shape(g_sr, g_hr, "gradient_recon_loss");
    return (g_sr - g_hr).abs().mean();
}

torch::Tensor diversity_loss(const torch::Tensor& g1, const torch::Tensor& g2, const torch::Tensor& z1,
                             const torch::Tensor& z2, double tau) {
    require_same_shape(g1, g2, "diversity_loss");
    require_same_shape(z1, z2, "diversity_loss noise");
    if (z1.dim() != 2 || z1.size(0) != g1.size(0)) {
        throw ShapeError("diversity_loss: noise must be (N, m) with N matching the maps");
    }
    auto dz = (z1 - z2).norm(2, {1});
    if ((dz < 1e-8).any().item<bool>()) {
        throw DegenerateNoiseError("diversity_loss: noise vectors coincide");
    }
    auto d = (g1 - g2).abs().flatten(1).mean(1);
    return torch::clamp_max(d / dz.to(d.dtype()), tau).mean();
}

torch::Tensor d_adversarial_loss(const torch::Tensor& logits_real, const torch::Tensor& logits_fake) {
    require_finite(logits_real, "d_adversarial_loss");
    require_finite(logits_fake, "d_adversarial_loss");
    return torch::softplus(-logits_real).mean() + torch::softplus(logits_fake).mean();
}

torch::Tensor g_adversarial_loss(const torch::Tensor& logits_fake) {
    require_finite(logits_fake, "g_adversarial_loss");
    return torch::softplus(-logits_fake).mean();
}

torch::Tensor r1_penalty_from_logits(const torch::Tensor& logits, const std::vector<torch::Tensor>& inputs) {
    auto grads = torch::autograd::grad({logits.sum()}, inputs, /*grad_outputs=*/{}, /*retain_graph=*/true,
                                       /*create_graph=*/true, /*allow_unused=*/true);
    auto total = torch::zeros({}, logits.options());
    for (const auto& g : grads) {
        if (g.defined()) total = total + g.pow(2).sum();
    }
    return 0.5 * total / static_cast<double>(inputs.front().size(0));
}

torch::Tensor r1_penalty(const Critic& critic, const std::vector<torch::Tensor>& real_inputs) {
    if (real_inputs.empty()) throw ShapeError("r1_penalty: no inputs");
    std::vector<torch::Tensor> inputs;
    inputs.reserve(real_inputs.size());
    for (const auto& x : real_inputs) inputs.push_back(x.detach().requires_grad_(true));
    auto logits = critic(inputs);
    if (!logits.requires_grad()) {
        // Critic ignores its input entirely.
        return torch::zeros({}, logits.options());
    }
    return r1_penalty_from_logits(logits, inputs);
}

} // namespace losses
} // namespace hallucsr
