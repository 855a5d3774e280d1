// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/eval.hpp"

#include "hallucsr/errors.hpp"
#include "hallucsr/image_io.hpp"
#include "hallucsr/imagecore.hpp"
#include "hallucsr/losses.hpp"
#include "hallucsr/rng.hpp"

#include <cmath>

namespace hallucsr {

SrModel as_sr_model(Generator generator) {
    return [generator](const torch::Tensor& lr, const torch::Tensor& z) mutable {
        torch::NoGradGuard no_grad;
        auto out = generator->forward(lr, z);
        return SrSample{out.image(), out.gradient()};
    };
}

namespace eval {

namespace {

constexpr double kDataRange = 2.0;
constexpr int64_t kWindow = 11;
constexpr double kSigma = 1.5;

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.sizes() != b.sizes()) throw ShapeError(std::string(what) + ": shape mismatch");
}

torch::Tensor gaussian_window() {
    auto x = torch::arange(kWindow, torch::kFloat64) - static_cast<double>(kWindow / 2);
    auto g = torch::exp(-(x * x) / (2.0 * kSigma * kSigma));
    return g / g.sum();
}

// Valid-mode separable Gaussian filter of every (N*C) plane.
torch::Tensor filter(const torch::Tensor& planes, const torch::Tensor& g) {
    auto h = torch::conv2d(planes, g.view({1, 1, 1, kWindow}));
    return torch::conv2d(h, g.view({1, 1, kWindow, 1}));
}

torch::Tensor noise_batch(const torch::Tensor& z, int64_t n) {
    return z.view({1, -1}).expand({n, z.numel()}).to(torch::kFloat32);
}

} // namespace

nlohmann::json MetricsReport::to_json() const {
    return {{"psnr", psnr},
            {"ssim", ssim},
            {"perceptual", perceptual},
            {"consistency_violation_rate", consistency_violation_rate},
            {"diversity", diversity}};
}

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
    require_same_shape(a, b, "psnr");
    const double mse = (a.to(torch::kFloat64) - b.to(torch::kFloat64)).pow(2).mean().item<double>();
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(kDataRange * kDataRange / mse));
}

double ssim(const torch::Tensor& a, const torch::Tensor& b) {
    require_same_shape(a, b, "ssim");
    auto x = imagecore::as_batch(a).to(torch::kFloat64);
    auto y = imagecore::as_batch(b).to(torch::kFloat64);
    if (x.size(2) < kWindow || x.size(3) < kWindow) {
        throw DimensionError("ssim needs images of at least 11x11 pixels");
    }
    x = x.flatten(0, 1).unsqueeze(1);
    y = y.flatten(0, 1).unsqueeze(1);

    const double c1 = std::pow(0.01 * kDataRange, 2);
    const double c2 = std::pow(0.03 * kDataRange, 2);
    const auto g = gaussian_window();
    auto mu_x = filter(x, g);
    auto mu_y = filter(y, g);
    auto var_x = filter(x * x, g) - mu_x * mu_x;
    auto var_y = filter(y * y, g) - mu_y * mu_y;
    auto cov = filter(x * y, g) - mu_x * mu_y;
    auto map = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) /
               ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
    return map.mean().item<double>();
}

double perceptual_distance(const torch::Tensor& a, const torch::Tensor& b, FeatureExtractorImpl& extractor) {
    torch::NoGradGuard no_grad;
    return losses::perceptual_loss(imagecore::as_batch(a), imagecore::as_batch(b), extractor).item<double>();
}

double consistency_violation_rate(const SrModel& model, const torch::Tensor& lr,
                                  const std::vector<torch::Tensor>& z_samples, double epsilon) {
    if (z_samples.empty()) throw ConfigError("consistency_violation_rate needs at least one z sample");
    auto low = imagecore::as_batch(lr);
    int64_t violations = 0;
    int64_t total = 0;
    for (const auto& z : z_samples) {
        auto image = model(low, noise_batch(z, low.size(0))).image;
        const auto factor = image.size(2) / low.size(2);
        auto diff = (imagecore::downscale(image, factor).to(torch::kFloat64) - low.to(torch::kFloat64)).abs();
        violations += (diff >= epsilon).sum().item<int64_t>();
        total += diff.numel();
    }
    return static_cast<double>(violations) / static_cast<double>(total);
}

double diversity_score(const SrModel& model, const torch::Tensor& lr, const std::vector<torch::Tensor>& z_samples) {
    if (z_samples.size() < 2) throw ConfigError("diversity_score needs at least two z samples");
    auto low = imagecore::as_batch(lr);
    std::vector<torch::Tensor> maps;
    for (const auto& z : z_samples) {
        maps.push_back(model(low, noise_batch(z, low.size(0))).gradient.to(torch::kFloat64));
    }
    double sum = 0.0;
    int64_t pairs = 0;
    for (size_t i = 0; i < maps.size(); ++i) {
        for (size_t j = i + 1; j < maps.size(); ++j) {
            sum += (maps[i] - maps[j]).abs().mean().item<double>();
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

std::vector<torch::Tensor> sample_noise(int64_t count, int64_t noise_dim, uint64_t seed) {
    auto gen = rng::torch_generator(seed, "grid-noise");
    std::vector<torch::Tensor> out;
    for (int64_t i = 0; i < count; ++i) {
        out.push_back(torch::randn({noise_dim}, gen, torch::kFloat32));
    }
    return out;
}

torch::Tensor emit_grid(const SrModel& model, const Dataset& samples, int64_t noise_dim, int64_t z_count,
                        uint64_t seed, const std::string& out_path) {
    if (samples.empty()) throw DatasetError("emit_grid: no samples");
    if (z_count < 0) throw ConfigError("z_count must be non-negative");
    const auto batch = data::make_batch(samples);
    const auto n = batch.lr.size(0);
    const auto factor = batch.hr.size(2) / batch.lr.size(2);

    std::vector<torch::Tensor> columns;
    columns.push_back(imagecore::upscale_nearest(batch.lr, factor));
    columns.push_back(batch.hr);
    columns.push_back(model(batch.lr, torch::zeros({n, noise_dim})).image);
    for (const auto& z : sample_noise(z_count, noise_dim, seed)) {
        columns.push_back(model(batch.lr, noise_batch(z, n)).image);
    }
    for (auto& c : columns) c = c.to(torch::kFloat32);
    // Rows: concatenate columns along width, then stack items along height.
    auto rows = torch::cat(columns, 3);
    auto grid = torch::cat(rows.unbind(0), 1);
    if (!out_path.empty()) image_io::write_png(out_path, grid);
    return grid;
}

} // namespace eval
} // namespace hallucsr
