// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/training.hpp"

#include "hallucsr/archive.hpp"
#include "hallucsr/errors.hpp"
#include "hallucsr/imagecore.hpp"
#include "hallucsr/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace hallucsr {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LossWeights, gamma, beta, alpha, tau, epsilon, r1_coeff)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GeneratorConfig, lr_size, scale_factor, base_channels, min_channels,
                                                num_residual_blocks, disc_residual_blocks, noise_dim, image_channels,
                                                leak, residual_norm)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, lr_generator, lr_discriminator, adam_beta1, adam_beta2,
                                                batch_size, total_steps, seed, weights, checkpoint_every)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExtractorConfig, seed, stage_widths, leak, weights_path)

nlohmann::json to_json_value(const GeneratorConfig& c) { return c; }
nlohmann::json to_json_value(const TrainConfig& c) { return c; }
nlohmann::json to_json_value(const ExtractorConfig& c) { return c; }

void TrainConfig::validate() const {
    if (!(lr_generator > 0) || !(lr_discriminator > 0)) throw ConfigError("learning rates must be positive");
    if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1) {
        throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (total_steps <= 0) throw ConfigError("total_steps must be positive");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
    weights.validate();
}

namespace {

std::unique_ptr<torch::optim::Adam> make_adam(const std::vector<torch::Tensor>& params, double lr,
                                              const TrainConfig& c) {
    return std::make_unique<torch::optim::Adam>(
        params, torch::optim::AdamOptions(lr).betas({c.adam_beta1, c.adam_beta2}).eps(1e-8));
}

FeatureExtractor make_extractor(const ExtractorConfig& c, int64_t channels) {
    if (!c.weights_path.empty()) return load_feature_extractor(c.weights_path);
    return build_feature_extractor(c.seed, c.stage_widths, channels, c.leak);
}

double checked(const torch::Tensor& t, const char* name, int64_t step) {
    const double v = t.item<double>();
    if (!std::isfinite(v)) {
        throw NonFiniteError(std::string("non-finite ") + name + " at step " + std::to_string(step));
    }
    return v;
}

// Freezes a module's parameters for the lifetime of the guard.
class FrozenGuard {
public:
    explicit FrozenGuard(torch::nn::Module& m) : params_(m.parameters()) {
        for (auto& p : params_) p.requires_grad_(false);
    }
    ~FrozenGuard() {
        for (auto& p : params_) p.requires_grad_(true);
    }
    FrozenGuard(const FrozenGuard&) = delete;
    FrozenGuard& operator=(const FrozenGuard&) = delete;

private:
    std::vector<torch::Tensor> params_;
};

std::vector<torch::Tensor> concat_each(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
    std::vector<torch::Tensor> out;
    for (size_t i = 0; i < a.size(); ++i) out.push_back(torch::cat({a[i], b[i]}, 0));
    return out;
}

torch::Tensor sample_noise(int64_t n, int64_t dim, at::Generator& rng) {
    return torch::randn({n, dim}, rng, torch::kFloat32);
}

bool any_degenerate(const torch::Tensor& z1, const torch::Tensor& z2) {
    return ((z1 - z2).norm(2, {1}) < 1e-8).any().item<bool>();
}

// Adam state as plain arrays, "<prefix><k>.<field>" for the k-th parameter in
// group order. torch's own serializer is not byte-stable across runs.
std::vector<torch::Tensor> optimizer_params(const torch::optim::Optimizer& opt) {
    std::vector<torch::Tensor> out;
    for (const auto& g : opt.param_groups()) {
        for (const auto& p : g.params()) out.push_back(p);
    }
    return out;
}

void store_optimizer(Archive& archive, const std::string& prefix, const torch::optim::Adam& opt) {
    const auto params = optimizer_params(opt);
    for (size_t k = 0; k < params.size(); ++k) {
        auto it = opt.state().find(params[k].unsafeGetTensorImpl());
        if (it == opt.state().end()) continue;
        const auto& st = static_cast<const torch::optim::AdamParamState&>(*it->second);
        const auto key = prefix + std::to_string(k) + ".";
        archive.arrays[key + "step"] = torch::tensor(st.step(), torch::kInt64);
        archive.arrays[key + "exp_avg"] = st.exp_avg();
        archive.arrays[key + "exp_avg_sq"] = st.exp_avg_sq();
        if (st.max_exp_avg_sq().defined()) archive.arrays[key + "max_exp_avg_sq"] = st.max_exp_avg_sq();
    }
}

void restore_optimizer(const Archive& archive, const std::string& prefix, torch::optim::Adam& opt,
                       const std::string& path) {
    const auto params = optimizer_params(opt);
    for (size_t k = 0; k < params.size(); ++k) {
        const auto key = prefix + std::to_string(k) + ".";
        auto step = archive.arrays.find(key + "step");
        if (step == archive.arrays.end()) continue;
        auto field = [&](const std::string& name) {
            auto it = archive.arrays.find(key + name);
            if (it == archive.arrays.end() || it->second.sizes() != params[k].sizes() ||
                it->second.scalar_type() != params[k].scalar_type()) {
                throw FormatError(path + ": bad optimizer entry " + key + name);
            }
            return it->second.clone();
        };
        if (step->second.numel() != 1 || step->second.scalar_type() != torch::kInt64) {
            throw FormatError(path + ": bad optimizer entry " + key + "step");
        }
        auto st = std::make_unique<torch::optim::AdamParamState>();
        st->step(step->second.item<int64_t>());
        st->exp_avg(field("exp_avg"));
        st->exp_avg_sq(field("exp_avg_sq"));
        if (archive.arrays.count(key + "max_exp_avg_sq")) st->max_exp_avg_sq(field("max_exp_avg_sq"));
        opt.state()[params[k].unsafeGetTensorImpl()] = std::move(st);
    }
    for (const auto& [name, t] : archive.arrays) {
        if (name.rfind(prefix, 0) != 0) continue;
        const auto rest = name.substr(prefix.size());
        const auto k = std::strtoull(rest.c_str(), nullptr, 10);
        if (k >= params.size()) throw FormatError(path + ": optimizer entry " + name + " has no parameter");
    }
}

void store_parameters(Archive& archive, const std::string& prefix, const torch::nn::Module& module) {
    for (const auto& [name, t] : named_parameters_sorted(module)) archive.arrays[prefix + name] = t;
}

void restore_parameters(const Archive& archive, const std::string& prefix, torch::nn::Module& module,
                        const std::string& path) {
    torch::NoGradGuard no_grad;
    for (auto& item : module.named_parameters(true)) {
        auto it = archive.arrays.find(prefix + item.key());
        if (it == archive.arrays.end()) throw FormatError(path + ": missing array " + prefix + item.key());
        if (it->second.sizes() != item.value().sizes() || it->second.scalar_type() != item.value().scalar_type()) {
            throw FormatError(path + ": array " + prefix + item.key() + " has the wrong shape or dtype");
        }
        item.value().copy_(it->second);
    }
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace

ModelBundle make_bundle(const GeneratorConfig& model, const TrainConfig& train, const ExtractorConfig& extractor) {
    model.validate();
    train.validate();
    ModelBundle b;
    b.model = model;
    b.train = train;
    b.extractor_config = extractor;

    b.generator = Generator(model);
    b.image_critic = Discriminator(model, Domain::image);
    b.gradient_critic = Discriminator(model, Domain::gradient);
    auto gen = rng::torch_generator(train.seed, "init");
    b.generator->reset_parameters(gen);
    b.image_critic->reset_parameters(gen);
    b.gradient_critic->reset_parameters(gen);
    b.extractor = make_extractor(extractor, model.image_channels);

    b.generator_optimizer = make_adam(b.generator->parameters(), train.lr_generator, train);
    b.image_critic_optimizer = make_adam(b.image_critic->parameters(), train.lr_discriminator, train);
    b.gradient_critic_optimizer = make_adam(b.gradient_critic->parameters(), train.lr_discriminator, train);
    return b;
}

RealPyramid real_pyramid(const torch::Tensor& hr, int64_t num_scales) {
    RealPyramid p;
    for (int64_t k = 0; k < num_scales; ++k) {
        auto img = imagecore::downscale(hr, int64_t{1} << (num_scales - 1 - k));
        p.gradients.push_back(imagecore::compute_gradient(img));
        p.images.push_back(img);
    }
    return p;
}

DiscriminatorStepStats train_step_discriminators(ModelBundle& bundle, const Batch& batch, at::Generator& rng) {
    const auto& cfg = bundle.model;
    const auto& w = bundle.train.weights;
    const int64_t n = batch.lr.size(0);
    const int64_t n_recon = n / 2;

    MultiScaleOutput fake;
    torch::Tensor cond_fake;
    {
        torch::NoGradGuard no_grad;
        auto z = torch::cat({torch::zeros({n_recon, cfg.noise_dim}), sample_noise(n - n_recon, cfg.noise_dim, rng)});
        fake = bundle.generator->forward(batch.lr, z);
        cond_fake = imagecore::constraint_map(fake.image(), batch.lr, cfg.scale_factor, w.epsilon).data;
    }
    auto real = real_pyramid(batch.hr, cfg.num_scales());
    for (auto& t : real.images) t = t.detach().requires_grad_(true);
    for (auto& t : real.gradients) t = t.detach().requires_grad_(true);

    // The real conditioning plane is an R1 input too, which bounds the
    // critic's slope along the plane the generator is pushed through.
    auto cond_real = imagecore::zero_constraint_map(batch.lr, w.epsilon).data.requires_grad_(true);
    auto cond = torch::cat({cond_real, cond_fake}, 0);
    auto logits_i = bundle.image_critic->forward(concat_each(real.images, fake.images), cond);
    auto logits_g = bundle.gradient_critic->forward(concat_each(real.gradients, fake.gradients));

    auto adv_i = losses::d_adversarial_loss(logits_i.narrow(0, 0, n), logits_i.narrow(0, n, n));
    auto adv_g = losses::d_adversarial_loss(logits_g.narrow(0, 0, n), logits_g.narrow(0, n, n));
    auto r1_i = torch::zeros({});
    auto r1_g = torch::zeros({});
    if (w.r1_coeff > 0) {
        auto inputs = real.images;
        inputs.push_back(cond_real);
        r1_i = losses::r1_penalty_from_logits(logits_i.narrow(0, 0, n), inputs);
        r1_g = losses::r1_penalty_from_logits(logits_g.narrow(0, 0, n), real.gradients);
    }
    auto loss_i = adv_i + w.r1_coeff * r1_i;
    auto loss_g = adv_g + w.r1_coeff * r1_g;

    DiscriminatorStepStats s;
    s.loss_image = checked(loss_i, "loss_DI", bundle.step);
    s.loss_gradient = checked(loss_g, "loss_Dg", bundle.step);
    s.r1_image = checked(r1_i, "r1_I", bundle.step);
    s.r1_gradient = checked(r1_g, "r1_g", bundle.step);

    bundle.image_critic_optimizer->zero_grad();
    bundle.gradient_critic_optimizer->zero_grad();
    (loss_i + loss_g).backward();
    bundle.image_critic_optimizer->step();
    bundle.gradient_critic_optimizer->step();
    return s;
}

GeneratorStepStats train_step_generator(ModelBundle& bundle, const Batch& batch, at::Generator& rng) {
    const auto& cfg = bundle.model;
    const auto& w = bundle.train.weights;
    const int64_t n = batch.lr.size(0);

    auto z1 = sample_noise(n, cfg.noise_dim, rng);
    auto z2 = sample_noise(n, cfg.noise_dim, rng);
    if (any_degenerate(z1, z2)) {
        z2 = sample_noise(n, cfg.noise_dim, rng);
        if (any_degenerate(z1, z2)) {
            throw DegenerateNoiseError("noise draws coincide twice at step " + std::to_string(bundle.step));
        }
    }

    FrozenGuard freeze_i(*bundle.image_critic);
    FrozenGuard freeze_g(*bundle.gradient_critic);

    auto real = real_pyramid(batch.hr, cfg.num_scales());
    auto lr3 = batch.lr.repeat({3, 1, 1, 1});
    auto out = bundle.generator->forward(lr3, torch::cat({torch::zeros({n, cfg.noise_dim}), z1, z2}));
    auto cond = imagecore::constraint_map(out.image(), lr3, cfg.scale_factor, w.epsilon).data;
    auto logits_i = bundle.image_critic->forward(out.images, cond);
    auto logits_g = bundle.gradient_critic->forward(out.gradients);

    // Reconstruction pass: the first n items.
    auto percp = losses::perceptual_loss(out.image().narrow(0, 0, n), batch.hr, *bundle.extractor);
    auto grad = torch::zeros({});
    for (size_t k = 0; k < out.gradients.size(); ++k) {
        grad = grad + losses::gradient_recon_loss(out.gradients[k].narrow(0, 0, n), real.gradients[k]);
    }
    grad = grad / static_cast<double>(out.gradients.size());
    auto recons = losses::recons_total(percp, grad, losses::g_adversarial_loss(logits_g.narrow(0, 0, n)),
                                       losses::g_adversarial_loss(logits_i.narrow(0, 0, n)), w);

    // Hallucination pass: items n..3n.
    auto div = losses::diversity_loss(out.gradient().narrow(0, n, n), out.gradient().narrow(0, 2 * n, n), z1, z2,
                                      w.tau);
    auto halluc = losses::halluc_total(losses::g_adversarial_loss(logits_g.narrow(0, n, 2 * n)),
                                       losses::g_adversarial_loss(logits_i.narrow(0, n, 2 * n)), div, w);

    GeneratorStepStats s;
    s.recons = checked(recons, "loss_recons", bundle.step);
    s.halluc = checked(halluc, "loss_halluc", bundle.step);
    s.perceptual = checked(percp, "L_percp", bundle.step);
    s.gradient = checked(grad, "L_grad", bundle.step);
    s.diversity = checked(div, "L_z", bundle.step);

    bundle.generator_optimizer->zero_grad();
    (recons + halluc).backward();
    bundle.generator_optimizer->step();
    return s;
}

std::string metrics_csv_header() {
    return "step,loss_DI,loss_Dg,loss_recons,loss_halluc,L_percp,L_grad,L_z,r1_I,r1_g";
}

std::string metrics_csv_row(const MetricsRow& r) {
    std::string s = std::to_string(r.step);
    for (double v : {r.loss_DI, r.loss_Dg, r.loss_recons, r.loss_halluc, r.L_percp, r.L_grad, r.L_z, r.r1_I, r.r1_g}) {
        s += "," + format_double(v);
    }
    return s;
}

std::vector<size_t> batch_indices(size_t dataset_size, int64_t batch_size, uint64_t seed, int64_t step) {
    if (dataset_size == 0) throw DatasetError("dataset is empty");
    std::vector<size_t> out;
    std::vector<size_t> perm;
    uint64_t cached_epoch = ~uint64_t{0};
    for (int64_t i = 0; i < batch_size; ++i) {
        const auto pos = static_cast<uint64_t>(step) * static_cast<uint64_t>(batch_size) + static_cast<uint64_t>(i);
        const uint64_t epoch = pos / dataset_size;
        if (epoch != cached_epoch) {
            perm.resize(dataset_size);
            std::iota(perm.begin(), perm.end(), size_t{0});
            std::mt19937_64 gen(rng::substream_seed(seed, "data", epoch));
            std::shuffle(perm.begin(), perm.end(), gen);
            cached_epoch = epoch;
        }
        out.push_back(perm[pos % dataset_size]);
    }
    return out;
}

MetricsRow train_iteration(ModelBundle& bundle, const Dataset& dataset) {
    auto batch = data::make_batch(dataset, batch_indices(dataset.size(), bundle.train.batch_size, bundle.train.seed,
                                                         bundle.step));
    auto rng = rng::torch_generator(bundle.train.seed, "step", static_cast<uint64_t>(bundle.step));
    auto d = train_step_discriminators(bundle, batch, rng);
    auto g = train_step_generator(bundle, batch, rng);
    ++bundle.step;

    MetricsRow row;
    row.step = bundle.step;
    row.loss_DI = d.loss_image;
    row.loss_Dg = d.loss_gradient;
    row.loss_recons = g.recons;
    row.loss_halluc = g.halluc;
    row.L_percp = g.perceptual;
    row.L_grad = g.gradient;
    row.L_z = g.diversity;
    row.r1_I = d.r1_image;
    row.r1_g = d.r1_gradient;
    return row;
}

std::vector<MetricsRow> train(ModelBundle& bundle, const Dataset& dataset, const TrainOptions& options) {
    if (dataset.empty()) throw DatasetError("dataset is empty");
    const int64_t until = options.stop_at >= 0 ? std::min(options.stop_at, bundle.train.total_steps)
                                               : bundle.train.total_steps;
    std::ofstream csv;
    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        const auto path = options.out_dir / "metrics.csv";
        std::error_code ec;
        const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path, ec) == 0;
        csv.open(path, std::ios::app);
        if (!csv) throw IoError("cannot open " + path.string());
        if (fresh) csv << metrics_csv_header() << "\n";
    }

    std::vector<MetricsRow> rows;
    while (bundle.step < until) {
        auto row = train_iteration(bundle, dataset);
        rows.push_back(row);
        if (csv.is_open()) {
            csv << metrics_csv_row(row) << "\n";
            csv.flush();
        }
        if (options.on_step) options.on_step(row);
        const auto every = bundle.train.checkpoint_every;
        if (!options.out_dir.empty() && every > 0 && bundle.step % every == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_%06lld.hsr", static_cast<long long>(bundle.step));
            save_checkpoint(bundle, (options.out_dir / name).string(), options.checkpoint_meta);
        }
    }
    if (!options.out_dir.empty()) {
        save_checkpoint(bundle, (options.out_dir / "checkpoint.hsr").string(), options.checkpoint_meta);
    }
    return rows;
}

void save_checkpoint(const ModelBundle& bundle, const std::string& path, const nlohmann::json& extra_meta) {
    Archive a;
    a.meta = extra_meta.is_object() ? extra_meta : nlohmann::json::object();
    a.meta["format"] = 1;
    a.meta["step"] = bundle.step;
    a.meta["model"] = bundle.model;
    a.meta["train"] = bundle.train;
    a.meta["extractor"] = bundle.extractor_config;
    store_parameters(a, "generator.", *bundle.generator);
    store_parameters(a, "image_critic.", *bundle.image_critic);
    store_parameters(a, "gradient_critic.", *bundle.gradient_critic);
    store_parameters(a, "extractor.", *bundle.extractor);
    a.meta["extractor_widths"] = bundle.extractor->stage_widths();
    a.meta["extractor_leak"] = bundle.extractor->leak();
    store_optimizer(a, "optim.generator.", *bundle.generator_optimizer);
    store_optimizer(a, "optim.image_critic.", *bundle.image_critic_optimizer);
    store_optimizer(a, "optim.gradient_critic.", *bundle.gradient_critic_optimizer);
    write_archive(path, a);
}

CheckpointContents load_checkpoint(const std::string& path) {
    auto a = read_archive(path);
    GeneratorConfig model;
    TrainConfig train;
    ExtractorConfig extractor;
    std::vector<int64_t> widths;
    double leak = 0.2;
    int64_t step = 0;
    try {
        if (a.meta.at("format").get<int>() != 1) throw FormatError(path + ": unsupported checkpoint format");
        model = a.meta.at("model").get<GeneratorConfig>();
        train = a.meta.at("train").get<TrainConfig>();
        extractor = a.meta.at("extractor").get<ExtractorConfig>();
        widths = a.meta.at("extractor_widths").get<std::vector<int64_t>>();
        leak = a.meta.at("extractor_leak").get<double>();
        step = a.meta.at("step").get<int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": bad checkpoint metadata: " + e.what());
    }
    // The stored extractor weights are authoritative; never re-read weights_path.
    auto stored_extractor = extractor;
    stored_extractor.weights_path.clear();
    stored_extractor.stage_widths = widths;
    stored_extractor.leak = leak;

    CheckpointContents out{make_bundle(model, train, stored_extractor), a.meta};
    auto& b = out.bundle;
    b.extractor_config = extractor;
    restore_parameters(a, "generator.", *b.generator, path);
    restore_parameters(a, "image_critic.", *b.image_critic, path);
    restore_parameters(a, "gradient_critic.", *b.gradient_critic, path);
    restore_parameters(a, "extractor.", *b.extractor, path);
    restore_optimizer(a, "optim.generator.", *b.generator_optimizer, path);
    restore_optimizer(a, "optim.image_critic.", *b.image_critic_optimizer, path);
    restore_optimizer(a, "optim.gradient_critic.", *b.gradient_critic_optimizer, path);
    if (step > 0 && b.generator_optimizer->state().empty()) throw FormatError(path + ": missing optimizer state");
    b.step = step;
    return out;
}

uint64_t parameter_fingerprint(const torch::nn::Module& module) {
    uint64_t h = 1469598103934665603ULL;
    for (const auto& [name, t] : named_parameters_sorted(module)) {
        auto c = t.detach().contiguous();
        const auto* p = static_cast<const unsigned char*>(c.data_ptr());
        const auto bytes = static_cast<size_t>(c.numel() * c.element_size());
        for (auto ch : name) {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ULL;
        }
        for (size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 1099511628211ULL;
        }
    }
    return h;
}

} // namespace hallucsr
