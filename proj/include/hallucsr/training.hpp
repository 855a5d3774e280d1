// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hallucsr/data.hpp"
#include "hallucsr/losses.hpp"
#include "hallucsr/nets.hpp"

#include <torch/torch.h>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hallucsr {

struct TrainConfig {
    double lr_generator = 1e-4;
    double lr_discriminator = 4e-4; // two time-scale rule: 4x the generator rate
    double adam_beta1 = 0.0;
    double adam_beta2 = 0.9;
    int64_t batch_size = 8;
    int64_t total_steps = 200;
    uint64_t seed = 0;
    LossWeights weights;
    int64_t checkpoint_every = 0; // 0 disables intermediate checkpoints

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct ExtractorConfig {
    uint64_t seed = 1234;
    std::vector<int64_t> stage_widths{32, 64};
    double leak = 0.2;
    std::string weights_path; // empty: random frozen extractor from `seed`

    bool operator==(const ExtractorConfig&) const = default;
};

// Everything a training run mutates, plus the frozen extractor.
struct ModelBundle {
    GeneratorConfig model;
    TrainConfig train;
    ExtractorConfig extractor_config;

    Generator generator{nullptr};
    Discriminator image_critic{nullptr};
    Discriminator gradient_critic{nullptr};
    FeatureExtractor extractor{nullptr};

    std::unique_ptr<torch::optim::Adam> generator_optimizer;
    std::unique_ptr<torch::optim::Adam> image_critic_optimizer;
    std::unique_ptr<torch::optim::Adam> gradient_critic_optimizer;

    int64_t step = 0;
};

// Fresh networks initialised from the "init" substream of train.seed.
ModelBundle make_bundle(const GeneratorConfig& model, const TrainConfig& train, const ExtractorConfig& extractor);

// Ground-truth images and gradient maps at every generator scale (smallest
// first), obtained by area-downscaling hr.
struct RealPyramid {
    std::vector<torch::Tensor> images;
    std::vector<torch::Tensor> gradients;
};
RealPyramid real_pyramid(const torch::Tensor& hr, int64_t num_scales);

struct DiscriminatorStepStats {
    double loss_image = 0.0;
    double loss_gradient = 0.0;
    double r1_image = 0.0;
    double r1_gradient = 0.0;
};

struct GeneratorStepStats {
    double recons = 0.0;
    double halluc = 0.0;
    double perceptual = 0.0;
    double gradient = 0.0;
    double diversity = 0.0;
};

// One update of both critics. Fakes are half reconstructions (z = 0) and half
// hallucinations. Real image inputs carry the zero constraint map, fakes their
// own. Generator parameters are untouched. Throws NonFiniteError.
DiscriminatorStepStats train_step_discriminators(ModelBundle& bundle, const Batch& batch, at::Generator& rng);

// One generator update accumulating the reconstruction pass (z = 0) and the
// hallucination pass (two i.i.d. noise draws per item). Critic parameters are
// untouched. Throws NonFiniteError or DegenerateNoiseError.
GeneratorStepStats train_step_generator(ModelBundle& bundle, const Batch& batch, at::Generator& rng);

struct MetricsRow {
    int64_t step = 0;
    double loss_DI = 0.0;
    double loss_Dg = 0.0;
    double loss_recons = 0.0;
    double loss_halluc = 0.0;
    double L_percp = 0.0;
    double L_grad = 0.0;
    double L_z = 0.0;
    double r1_I = 0.0;
    double r1_g = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

// Dataset indices for a given step. Each epoch is a seeded permutation.
std::vector<size_t> batch_indices(size_t dataset_size, int64_t batch_size, uint64_t seed, int64_t step);

// One critic step followed by one generator step; advances bundle.step.
MetricsRow train_iteration(ModelBundle& bundle, const Dataset& dataset);

struct TrainOptions {
    // When set: metrics.csv (appended), checkpoint_<step>.hsr every
    // checkpoint_every steps and checkpoint.hsr at the end.
    std::filesystem::path out_dir;
    nlohmann::json checkpoint_meta = nlohmann::json::object();
    std::function<void(const MetricsRow&)> on_step;
    int64_t stop_at = -1; // stop early at this step (defaults to train.total_steps)
};

// Runs from bundle.step until total_steps (or stop_at). Returns the rows of
// the steps run.
std::vector<MetricsRow> train(ModelBundle& bundle, const Dataset& dataset, const TrainOptions& options = {});

struct CheckpointContents {
    ModelBundle bundle;
    nlohmann::json meta;
};

void save_checkpoint(const ModelBundle& bundle, const std::string& path,
                     const nlohmann::json& extra_meta = nlohmann::json::object());
CheckpointContents load_checkpoint(const std::string& path);

// FNV-1a over the raw bytes of every parameter, in name order.
uint64_t parameter_fingerprint(const torch::nn::Module& module);

nlohmann::json to_json_value(const GeneratorConfig& c);
nlohmann::json to_json_value(const TrainConfig& c);
nlohmann::json to_json_value(const ExtractorConfig& c);

} // namespace hallucsr
