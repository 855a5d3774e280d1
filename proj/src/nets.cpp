// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/nets.hpp"

#include "hallucsr/archive.hpp"
#include "hallucsr/errors.hpp"
#include "hallucsr/imagecore.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace hallucsr {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d conv(int64_t in, int64_t out, int64_t kernel, bool bias = true) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).padding(kernel / 2).bias(bias));
}

torch::Tensor lrelu(const torch::Tensor& x, double leak) {
    return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(leak));
}

torch::Tensor upsample2(const torch::Tensor& x) {
    return x.repeat_interleave(2, 2).repeat_interleave(2, 3);
}

// He-normal for leaky activations; `gain` scales the standard deviation.
void init_conv(torch::nn::Conv2d& c, at::Generator& gen, double leak, double gain = 1.0) {
    torch::NoGradGuard no_grad;
    auto& w = c->weight;
    const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
    const double std = gain * std::sqrt(2.0 / ((1.0 + leak * leak) * fan_in));
    w.normal_(0.0, std, gen);
    if (c->bias.defined()) c->bias.zero_();
}

// The second convolution of each block starts small so that a deep
// unnormalised trunk stays close to the identity at initialisation.
void init_residual_blocks(torch::nn::Sequential& trunk, at::Generator& gen, double leak) {
    for (auto& child : trunk->children()) {
        for (auto& item : child->named_children()) {
            if (item.value()->as<torch::nn::Conv2dImpl>()) {
                torch::nn::Conv2d holder(std::dynamic_pointer_cast<torch::nn::Conv2dImpl>(item.value()));
                init_conv(holder, gen, leak, item.key() == "conv2" ? 0.1 : 1.0);
            }
        }
    }
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

} // namespace

int64_t GeneratorConfig::num_scales() const {
    int64_t n = 0;
    for (int64_t f = scale_factor; f > 1; f >>= 1) ++n;
    return n;
}

int64_t GeneratorConfig::channels_at(int64_t k) const {
    return std::max(base_channels >> k, std::min(min_channels, base_channels));
}

void GeneratorConfig::validate() const {
    require(scale_factor == 2 || scale_factor == 4 || scale_factor == 8, "scale_factor must be 2, 4 or 8");
    require(lr_size >= 2, "lr_size must be at least 2");
    require(base_channels >= 1 && min_channels >= 1, "channel counts must be positive");
    require(num_residual_blocks >= 1, "num_residual_blocks must be at least 1");
    require(disc_residual_blocks >= 0, "disc_residual_blocks must be non-negative");
    require(noise_dim >= 1, "noise_dim must be at least 1");
    require(image_channels == 1 || image_channels == 3, "image_channels must be 1 or 3");
    require(leak >= 0.0 && leak < 1.0, "leak must lie in [0, 1)");
    require(residual_norm == "none" || residual_norm == "instance", "residual_norm must be none or instance");
}

// ---------------------------------------------------------------------------

ResidualBlockImpl::ResidualBlockImpl(int64_t channels, double leak, const std::string& norm)
    : conv1_(conv(channels, channels, 3)), conv2_(conv(channels, channels, 3)), leak_(leak) {
    register_module("conv1", conv1_);
    register_module("conv2", conv2_);
    if (norm == "instance") {
        norm1_ = register_module("norm1", torch::nn::InstanceNorm2d(
                                              torch::nn::InstanceNorm2dOptions(channels).affine(true)));
        norm2_ = register_module("norm2", torch::nn::InstanceNorm2d(
                                              torch::nn::InstanceNorm2dOptions(channels).affine(true)));
    }
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
    auto h = conv1_(x);
    if (norm1_) h = norm1_(h);
    h = conv2_(lrelu(h, leak_));
    if (norm2_) h = norm2_(h);
    return x + h;
}

// ---------------------------------------------------------------------------

UpBlockImpl::UpBlockImpl(int64_t in_channels, int64_t out_channels, int64_t image_channels, double leak)
    : shared_(conv(in_channels, out_channels, 3)),
      image_conv_(conv(out_channels, out_channels, 3)),
      gradient_conv_(conv(out_channels, out_channels, 3)),
      to_image_(conv(out_channels, image_channels, 1)),
      to_gradient_(conv(out_channels, 1, 1)),
      leak_(leak) {
    register_module("shared", shared_);
    register_module("image_conv", image_conv_);
    register_module("gradient_conv", gradient_conv_);
    register_module("to_image", to_image_);
    register_module("to_gradient", to_gradient_);
}

UpBlockImpl::Output UpBlockImpl::forward(const torch::Tensor& features, const torch::Tensor& preactivation) {
    auto h = lrelu(shared_(upsample2(features)), leak_);
    auto fi = lrelu(image_conv_(h), leak_);
    auto fg = lrelu(gradient_conv_(h), leak_);
    Output out;
    out.features = h;
    out.preactivation = upsample2(preactivation) + to_image_(fi);
    out.gradient = imagecore::kMaxGradient * torch::sigmoid(to_gradient_(fg));
    return out;
}

// ---------------------------------------------------------------------------

GeneratorImpl::GeneratorImpl(GeneratorConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto& c = config_;
    stem_ = register_module("stem", conv(c.image_channels + c.noise_dim, c.base_channels, 3));
    trunk_ = torch::nn::Sequential();
    for (int64_t i = 0; i < c.num_residual_blocks; ++i) {
        trunk_->push_back(ResidualBlock(c.base_channels, c.leak, c.residual_norm));
    }
    register_module("trunk", trunk_);
    upblocks_ = torch::nn::ModuleList();
    for (int64_t k = 1; k <= c.num_scales(); ++k) {
        upblocks_->push_back(UpBlock(c.channels_at(k - 1), c.channels_at(k), c.image_channels, c.leak));
    }
    register_module("up", upblocks_);
}

MultiScaleOutput GeneratorImpl::forward(const torch::Tensor& lr, const torch::Tensor& z) {
    const auto& c = config_;
    if (lr.dim() != 4 || lr.size(1) != c.image_channels || lr.size(2) != c.lr_size || lr.size(3) != c.lr_size) {
        throw ShapeError("generator expects lr of shape (N, " + std::to_string(c.image_channels) + ", " +
                         std::to_string(c.lr_size) + ", " + std::to_string(c.lr_size) + ")");
    }
    if (z.dim() != 2 || z.size(0) != lr.size(0) || z.size(1) != c.noise_dim) {
        throw ShapeError("generator expects z of shape (N, " + std::to_string(c.noise_dim) + ")");
    }
    const auto n = lr.size(0);
    auto tiled = z.to(lr.dtype()).view({n, c.noise_dim, 1, 1}).expand({n, c.noise_dim, c.lr_size, c.lr_size});
    auto f = lrelu(stem_(torch::cat({lr, tiled}, 1)), c.leak);
    f = trunk_->forward(f);
    auto pre = torch::atanh(lr.clamp(-0.999, 0.999));

    MultiScaleOutput out;
    for (const auto& m : *upblocks_) {
        auto step = m->as<UpBlockImpl>()->forward(f, pre);
        f = step.features;
        pre = step.preactivation;
        out.images.push_back(torch::tanh(pre));
        out.gradients.push_back(step.gradient);
    }
    return out;
}

void GeneratorImpl::reset_parameters(at::Generator& gen) {
    const double leak = config_.leak;
    init_conv(stem_, gen, leak);
    init_residual_blocks(trunk_, gen, leak);
    for (const auto& m : *upblocks_) {
        auto* up = m->as<UpBlockImpl>();
        for (const auto& child : up->children()) {
            torch::nn::Conv2d holder(std::dynamic_pointer_cast<torch::nn::Conv2dImpl>(child));
            init_conv(holder, gen, leak);
        }
        init_conv(up->image_projection(), gen, leak, 0.1);
        init_conv(up->gradient_projection(), gen, leak, 0.1);
        torch::NoGradGuard no_grad;
        // Start gradient outputs near typical edge magnitudes rather than at half range.
        up->gradient_projection()->bias.fill_(-3.0);
    }
}

// ---------------------------------------------------------------------------

DiscriminatorImpl::DiscriminatorImpl(const GeneratorConfig& config, Domain domain)
    : config_(config), domain_(domain), in_channels_(domain == Domain::image ? config.image_channels : 1) {
    config_.validate();
    const auto& c = config_;
    from_pixels_ = torch::nn::ModuleList();
    convs_a_ = torch::nn::ModuleList();
    convs_b_ = torch::nn::ModuleList();
    for (int64_t j = 0; j < c.num_scales(); ++j) {
        const auto width = c.channels_at(j + 1);
        from_pixels_->push_back(conv(in_channels_, width, 1));
        convs_a_->push_back(conv(width, width, 3));
        convs_b_->push_back(conv(width, c.channels_at(j), 3));
    }
    register_module("from_pixels", from_pixels_);
    register_module("conv_a", convs_a_);
    register_module("conv_b", convs_b_);
    if (domain_ == Domain::image) {
        cond_mix_ = register_module("cond_mix", conv(c.base_channels + 1, c.base_channels, 1));
    }
    trunk_ = torch::nn::Sequential();
    for (int64_t i = 0; i < c.disc_residual_blocks; ++i) {
        trunk_->push_back(ResidualBlock(c.base_channels, c.leak, c.residual_norm));
    }
    register_module("trunk", trunk_);
    to_logits_ = register_module("to_logits", conv(c.base_channels, 1, 1, /*bias=*/false));
}

torch::Tensor DiscriminatorImpl::forward(const std::vector<torch::Tensor>& inputs, const torch::Tensor& cond) {
    const auto& c = config_;
    const auto scales = c.num_scales();
    if (static_cast<int64_t>(inputs.size()) != scales) {
        throw ShapeError("discriminator expects " + std::to_string(scales) + " scales, got " +
                         std::to_string(inputs.size()));
    }
    const auto n = inputs.front().size(0);
    for (int64_t j = 0; j < scales; ++j) {
        const auto side = c.lr_size << (j + 1);
        const auto& x = inputs[j];
        if (x.dim() != 4 || x.size(0) != n || x.size(1) != in_channels_ || x.size(2) != side || x.size(3) != side) {
            throw ShapeError("discriminator input " + std::to_string(j) + " must be (N, " +
                             std::to_string(in_channels_) + ", " + std::to_string(side) + ", " +
                             std::to_string(side) + ")");
        }
    }

    torch::Tensor f;
    for (int64_t j = scales - 1; j >= 0; --j) {
        auto p = lrelu(from_pixels_[j]->as<torch::nn::Conv2dImpl>()->forward(inputs[j]), c.leak);
        f = f.defined() ? f + p : p;
        f = lrelu(convs_a_[j]->as<torch::nn::Conv2dImpl>()->forward(f), c.leak);
        f = lrelu(convs_b_[j]->as<torch::nn::Conv2dImpl>()->forward(f), c.leak);
        f = torch::avg_pool2d(f, {2, 2});
    }

    if (domain_ == Domain::image) {
        torch::Tensor plane = cond;
        if (!plane.defined()) {
            plane = torch::zeros({n, 1, c.lr_size, c.lr_size}, f.options());
        } else if (plane.dim() != 4 || plane.size(0) != n || plane.size(1) != 1 || plane.size(2) != c.lr_size ||
                   plane.size(3) != c.lr_size) {
            throw ShapeError("constraint map must be (N, 1, lr_size, lr_size)");
        }
        f = lrelu(cond_mix_(torch::cat({f, plane.to(f.dtype())}, 1)), c.leak);
    }
    if (!trunk_->is_empty()) f = trunk_->forward(f);
    return to_logits_(f);
}

void DiscriminatorImpl::reset_parameters(at::Generator& gen) {
    const double leak = config_.leak;
    for (auto* list : {&from_pixels_, &convs_a_, &convs_b_}) {
        for (const auto& m : **list) {
            torch::nn::Conv2d holder(std::dynamic_pointer_cast<torch::nn::Conv2dImpl>(m));
            init_conv(holder, gen, leak);
        }
    }
    if (cond_mix_) init_conv(cond_mix_, gen, leak);
    init_residual_blocks(trunk_, gen, leak);
    // Linear output: plain 1/sqrt(fan_in) scaling.
    init_conv(to_logits_, gen, 1.0, 1.0);
}

// ---------------------------------------------------------------------------

FeatureExtractorImpl::FeatureExtractorImpl(int64_t in_channels, std::vector<int64_t> stage_widths, double leak)
    : in_channels_(in_channels), widths_(std::move(stage_widths)), leak_(leak) {
    if (widths_.empty()) throw ConfigError("feature extractor needs at least one stage");
    stages_ = torch::nn::ModuleList();
    int64_t in = in_channels_;
    for (auto w : widths_) {
        if (w < 1) throw ConfigError("feature extractor stage widths must be positive");
        stages_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, w, 4).stride(2).padding(1)));
        in = w;
    }
    register_module("stages", stages_);
}

std::vector<torch::Tensor> FeatureExtractorImpl::forward(const torch::Tensor& x) {
    std::vector<torch::Tensor> features;
    auto h = x;
    for (const auto& m : *stages_) {
        h = lrelu(m->as<torch::nn::Conv2dImpl>()->forward(h), leak_);
        features.push_back(h);
    }
    return features;
}

void FeatureExtractorImpl::freeze() {
    for (auto& p : parameters()) p.requires_grad_(false);
    eval();
}

FeatureExtractor build_feature_extractor(uint64_t seed, const std::vector<int64_t>& stage_widths,
                                         int64_t in_channels, double leak) {
    FeatureExtractor fx(in_channels, stage_widths, leak);
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    for (const auto& m : *fx->stages()) {
        torch::nn::Conv2d holder(std::dynamic_pointer_cast<torch::nn::Conv2dImpl>(m));
        init_conv(holder, gen, leak);
    }
    fx->freeze();
    return fx;
}

FeatureExtractor load_feature_extractor(const std::string& path) {
    auto archive = read_archive(path);
    double leak = 0.2;
    if (archive.meta.contains("leak")) {
        if (!archive.meta["leak"].is_number()) throw FormatError(path + ": meta 'leak' must be a number");
        leak = archive.meta["leak"].get<double>();
    }
    std::vector<torch::Tensor> weights;
    for (int k = 1;; ++k) {
        auto it = archive.arrays.find("stage" + std::to_string(k) + ".weight");
        if (it == archive.arrays.end()) break;
        weights.push_back(it->second);
    }
    if (weights.empty()) throw FormatError(path + ": no stage1.weight entry");

    std::vector<int64_t> widths;
    int64_t in = weights.front().dim() == 4 ? weights.front().size(1) : -1;
    const int64_t in_channels = in;
    for (size_t k = 0; k < weights.size(); ++k) {
        const auto& w = weights[k];
        if (w.dim() != 4 || w.size(1) != in || w.size(2) != 4 || w.size(3) != 4) {
            throw FormatError(path + ": stage" + std::to_string(k + 1) + ".weight must be (out, " +
                              std::to_string(in) + ", 4, 4)");
        }
        widths.push_back(w.size(0));
        in = w.size(0);
    }

    FeatureExtractor fx(in_channels, widths, leak);
    torch::NoGradGuard no_grad;
    for (size_t k = 0; k < weights.size(); ++k) {
        auto* c = fx->stages()[k]->as<torch::nn::Conv2dImpl>();
        c->weight.copy_(weights[k]);
        auto bias = archive.arrays.find("stage" + std::to_string(k + 1) + ".bias");
        if (bias != archive.arrays.end()) {
            if (bias->second.dim() != 1 || bias->second.size(0) != widths[k]) {
                throw FormatError(path + ": stage" + std::to_string(k + 1) + ".bias has the wrong size");
            }
            c->bias.copy_(bias->second);
        } else {
            c->bias.zero_();
        }
    }
    fx->freeze();
    return fx;
}

std::vector<std::pair<std::string, torch::Tensor>> named_parameters_sorted(const torch::nn::Module& module) {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (const auto& item : module.named_parameters(/*recurse=*/true)) {
        out.emplace_back(item.key(), item.value());
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

} // namespace hallucsr
