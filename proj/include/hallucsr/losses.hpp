// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <functional>
#include <vector>

namespace hallucsr {

class FeatureExtractorImpl;

struct LossWeights {
    double gamma = 10.0;   // reconstruction terms in L_recons
    double beta = 0.1;     // adversarial terms in L_recons
    double alpha = 1.0;    // diversity term in L_halluc
    double tau = 10.0;     // clamp on the diversity ratio
    double epsilon = 0.1;  // slack of the downscale-consistency map, in colour levels
    double r1_coeff = 10.0;

    // Throws ConfigError on negative weights or non-positive tau.
    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

namespace losses {

// Sum over extractor stages of the mean absolute feature difference.
torch::Tensor perceptual_loss(const torch::Tensor& sr, const torch::Tensor& hr,
                              FeatureExtractorImpl& extractor);

// Mean absolute difference of two gradient maps.
torch::Tensor gradient_recon_loss(const torch::Tensor& g_sr, const torch::Tensor& g_hr);

// Batch mean of min(d(g1_i, g2_i) / ||z1_i - z2_i||_2, tau), with d the mean
// absolute pixel difference of item i. Maps are (N, 1, H, W), noise (N, m).
// Throws DegenerateNoiseError when any ||z1_i - z2_i|| < 1e-8.
torch::Tensor diversity_loss(const torch::Tensor& g1, const torch::Tensor& g2, const torch::Tensor& z1,
                             const torch::Tensor& z2, double tau);

// Non-saturating discriminator objective on raw logits:
// mean softplus(-real) + mean softplus(fake).
torch::Tensor d_adversarial_loss(const torch::Tensor& logits_real, const torch::Tensor& logits_fake);

// Non-saturating generator objective: mean softplus(-fake).
torch::Tensor g_adversarial_loss(const torch::Tensor& logits_fake);

// Anything mapping a list of (per-scale) inputs to logits.
using Critic = std::function<torch::Tensor(const std::vector<torch::Tensor>&)>;

// 0.5 * batch mean of ||d(sum logits)/d(inputs)||^2 over all input tensors.
// The result keeps its graph, so it can be backpropagated into the critic's
// parameters.
torch::Tensor r1_penalty(const Critic& critic, const std::vector<torch::Tensor>& real_inputs);

// Same penalty when the forward pass already happened. Every input must
// require grad and be part of the graph of `logits`.
torch::Tensor r1_penalty_from_logits(const torch::Tensor& logits, const std::vector<torch::Tensor>& inputs);

// gamma (percp + grad) + beta (adv_g + adv_i)
template <typename T>
T recons_total(const T& percp, const T& grad, const T& adv_g, const T& adv_i, const LossWeights& w) {
    return w.gamma * (percp + grad) + w.beta * (adv_g + adv_i);
}

// adv_g + adv_i - alpha * div. The diversity ratio is maximised, hence the sign.
template <typename T>
T halluc_total(const T& adv_g, const T& adv_i, const T& div, const LossWeights& w) {
    return adv_g + adv_i - w.alpha * div;
}

} // namespace losses
} // namespace hallucsr
