// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

namespace hallucsr {

struct GeneratorConfig {
    int64_t lr_size = 4;
    int64_t scale_factor = 8;       // 2, 4 or 8; one upblock per factor of two
    int64_t base_channels = 32;     // width of the residual trunk
    int64_t min_channels = 8;       // floor for the halving schedule in upblocks
    int64_t num_residual_blocks = 8;
    int64_t disc_residual_blocks = 2;  // kept shallow for CPU training
    int64_t noise_dim = 64;
    int64_t image_channels = 3;
    double leak = 0.2;
    std::string residual_norm = "none"; // "none" or "instance"

    int64_t hr_size() const { return lr_size * scale_factor; }
    int64_t num_scales() const;
    // Channels at scale k: k = 0 is the trunk, k = 1..num_scales the upblocks.
    int64_t channels_at(int64_t k) const;
    void validate() const;
    bool operator==(const GeneratorConfig&) const = default;
};

// Per-scale outputs, ordered from 2 * lr_size up to hr_size.
struct MultiScaleOutput {
    std::vector<torch::Tensor> images;    // (N, C, s, s) in [-1, 1]
    std::vector<torch::Tensor> gradients; // (N, 1, s, s) in [0, kMaxGradient]

    const torch::Tensor& image() const { return images.back(); }
    const torch::Tensor& gradient() const { return gradients.back(); }
};

class ResidualBlockImpl : public torch::nn::Module {
public:
    ResidualBlockImpl(int64_t channels, double leak, const std::string& norm);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
    torch::nn::InstanceNorm2d norm1_{nullptr}, norm2_{nullptr};
    double leak_;
};
TORCH_MODULE(ResidualBlock);

// Doubles resolution. A shared 3x3 convolution feeds an image branch and a
// gradient branch, each a 3x3 convolution then a 1x1 projection to pixels.
// The image branch adds to the upsampled pre-activation of the previous
// scale, which carries low-frequency content through unchanged.
class UpBlockImpl : public torch::nn::Module {
public:
    UpBlockImpl(int64_t in_channels, int64_t out_channels, int64_t image_channels, double leak);

    struct Output {
        torch::Tensor features;
        torch::Tensor preactivation; // image before tanh
        torch::Tensor gradient;
    };
    Output forward(const torch::Tensor& features, const torch::Tensor& preactivation);

    torch::nn::Conv2d& image_projection() { return to_image_; }
    torch::nn::Conv2d& gradient_projection() { return to_gradient_; }

private:
    torch::nn::Conv2d shared_{nullptr}, image_conv_{nullptr}, gradient_conv_{nullptr};
    torch::nn::Conv2d to_image_{nullptr}, to_gradient_{nullptr};
    double leak_;
};
TORCH_MODULE(UpBlock);

class GeneratorImpl : public torch::nn::Module {
public:
    explicit GeneratorImpl(GeneratorConfig config);

    // lr: (N, C, lr_size, lr_size); z: (N, noise_dim). z = 0 reconstructs,
    // anything else hallucinates.
    MultiScaleOutput forward(const torch::Tensor& lr, const torch::Tensor& z);

    const GeneratorConfig& config() const { return config_; }

    // He-normal weights drawn from `gen`, zero biases, small output projections.
    void reset_parameters(at::Generator& gen);

private:
    GeneratorConfig config_;
    torch::nn::Conv2d stem_{nullptr};
    torch::nn::Sequential trunk_{nullptr};
    torch::nn::ModuleList upblocks_{nullptr};
};
TORCH_MODULE(Generator);

enum class Domain { image, gradient };

// Mirror of the generator: one downblock per scale (1x1 pixel-to-feature
// input, two 3x3 convolutions, 2x average pooling), optional conditioning
// plane concatenated at the LR grid, residual blocks, then a bias-free 1x1
// convolution whose feature map is used directly as logits.
class DiscriminatorImpl : public torch::nn::Module {
public:
    DiscriminatorImpl(const GeneratorConfig& config, Domain domain);

    // inputs: one tensor per scale, same order as MultiScaleOutput.
    // cond: (N, 1, lr, lr) for the image domain; ignored for gradients. An
    // undefined cond means the all-zero map.
    torch::Tensor forward(const std::vector<torch::Tensor>& inputs, const torch::Tensor& cond = {});

    Domain domain() const { return domain_; }
    torch::nn::Conv2d& final_projection() { return to_logits_; }

    void reset_parameters(at::Generator& gen);

private:
    GeneratorConfig config_;
    Domain domain_;
    int64_t in_channels_;
    torch::nn::ModuleList from_pixels_{nullptr};
    torch::nn::ModuleList convs_a_{nullptr};
    torch::nn::ModuleList convs_b_{nullptr};
    torch::nn::Conv2d cond_mix_{nullptr};
    torch::nn::Sequential trunk_{nullptr};
    torch::nn::Conv2d to_logits_{nullptr};
};
TORCH_MODULE(Discriminator);

// Frozen stack of stride-2 4x4 convolutions with leaky activations. Stage k
// (1-based) produces features at input_size / 2^k. Stands in for a
// pretrained classifier backbone; real weights can be loaded from an archive.
class FeatureExtractorImpl : public torch::nn::Module {
public:
    FeatureExtractorImpl(int64_t in_channels, std::vector<int64_t> stage_widths, double leak);

    std::vector<torch::Tensor> forward(const torch::Tensor& x);

    const std::vector<int64_t>& stage_widths() const { return widths_; }
    double leak() const { return leak_; }
    int64_t in_channels() const { return in_channels_; }
    torch::nn::ModuleList& stages() { return stages_; }

    void freeze();

private:
    int64_t in_channels_;
    std::vector<int64_t> widths_;
    double leak_;
    torch::nn::ModuleList stages_{nullptr};
};
TORCH_MODULE(FeatureExtractor);

// Random frozen extractor, fully determined by the seed.
FeatureExtractor build_feature_extractor(uint64_t seed, const std::vector<int64_t>& stage_widths,
                                         int64_t in_channels = 3, double leak = 0.2);

// Load extractor weights from a named-array archive (see archive.hpp). Entries
// "stage<k>.weight" (out, in, 4, 4) for k = 1..K and optional
// "stage<k>.bias"; meta key "leak" overrides the default activation slope.
// Throws FormatError on malformed files.
FeatureExtractor load_feature_extractor(const std::string& path);

// Parameters of a module as (hierarchical name, tensor) pairs, sorted by name.
std::vector<std::pair<std::string, torch::Tensor>> named_parameters_sorted(const torch::nn::Module& module);

} // namespace hallucsr
