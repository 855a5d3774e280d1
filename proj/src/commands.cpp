// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/commands.hpp"

#include "hallucsr/data.hpp"
#include "hallucsr/errors.hpp"
#include "hallucsr/eval.hpp"
#include "hallucsr/image_io.hpp"
#include "hallucsr/imagecore.hpp"
#include "hallucsr/rng.hpp"
#include "hallucsr/training.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>

namespace hallucsr::commands {

namespace fs = std::filesystem;

namespace {

Dataset build_dataset(const RunConfig& cfg, const std::string& source) {
    const auto hr = cfg.model.hr_size();
    if (source == "synthetic") {
        return data::synth_dataset(cfg.data.synthetic_count, hr, cfg.model.scale_factor,
                                   rng::substream_seed(cfg.train.seed, "synth"));
    }
    return data::load_dataset(source, hr, cfg.model.scale_factor);
}

Dataset select_split(const Dataset& all, const RunConfig& cfg, const std::string& which) {
    if (which == "all" || all.size() < 2) return all;
    auto [train, test] = data::split(all, cfg.data.train_fraction, cfg.train.seed);
    if (which == "train") return train;
    if (which == "test") return test.empty() ? train : test;
    throw ConfigError("unknown split '" + which + "' (expected test, train or all)");
}

RunConfig config_from_checkpoint(const CheckpointContents& ckpt) {
    RunConfig cfg;
    if (ckpt.meta.contains("run_config") && ckpt.meta["run_config"].is_string()) {
        cfg = config::parse_toml(ckpt.meta["run_config"].get<std::string>());
    }
    cfg.model = ckpt.bundle.model;
    cfg.train = ckpt.bundle.train;
    cfg.extractor = ckpt.bundle.extractor_config;
    return cfg;
}

void set_threads(int64_t threads) {
    torch::set_num_threads(static_cast<int>(threads));
}

} // namespace

OutputLock::OutputLock(const fs::path& dir) {
    fs::create_directories(dir);
    file_ = dir / ".hallucsr.lock";
    fd_ = ::open(file_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) throw IoError("output directory " + dir.string() + " is locked by another process (" +
                               file_.string() + ")");
}

OutputLock::~OutputLock() {
    if (fd_ >= 0) {
        ::close(fd_);
        std::error_code ec;
        fs::remove(file_, ec);
    }
}

RunConfig resolve_config(const TrainArgs& args) {
    RunConfig base;
    if (const char* env = std::getenv(kOutEnv); env && *env) base.out_dir = env;
    RunConfig cfg = args.config_path ? config::load(*args.config_path, base) : base;
    for (const auto& [key, value] : args.sets) config::apply_override(cfg, key, value);
    if (args.seed) cfg.train.seed = *args.seed;
    if (args.steps) cfg.train.total_steps = *args.steps;
    if (args.out_dir) cfg.out_dir = *args.out_dir;
    cfg.validate();
    return cfg;
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
    try {
        const auto cfg = resolve_config(args);
        set_threads(cfg.threads);
        const fs::path dir = cfg.out_dir;

        const auto all = build_dataset(cfg, cfg.data.source);
        const auto train_set = select_split(all, cfg, "train");

        OutputLock lock(dir);
        config::save(dir / "config.toml", cfg);

        const auto resume_path = dir / "checkpoint.hsr";
        ModelBundle bundle = (args.resume && fs::exists(resume_path))
                                 ? load_checkpoint(resume_path.string()).bundle
                                 : make_bundle(cfg.model, cfg.train, cfg.extractor);
        if (args.resume) bundle.train.total_steps = cfg.train.total_steps;
        if (!args.resume) fs::remove(dir / "metrics.csv");

        TrainOptions opts;
        opts.out_dir = dir;
        opts.checkpoint_meta = {{"run_config", config::to_toml(cfg)}};
        if (!args.quiet) {
            opts.on_step = [&out, total = cfg.train.total_steps](const MetricsRow& r) {
                if (r.step % 50 == 0 || r.step == total) {
                    out << "step " << r.step << "/" << total << "  recons " << r.loss_recons << "  halluc "
                        << r.loss_halluc << "  D_I " << r.loss_DI << "  D_g " << r.loss_Dg << "\n";
                }
            };
        }
        train(bundle, train_set, opts);

        Dataset shown(train_set.begin(), train_set.begin() + std::min<std::ptrdiff_t>(4, train_set.size()));
        eval::emit_grid(as_sr_model(bundle.generator), shown, cfg.model.noise_dim, cfg.grid_z_count, cfg.train.seed,
                        (dir / "grid.png").string());
        if (!args.quiet) out << "wrote " << (dir / "checkpoint.hsr").string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "train: " << e.what() << "\n";
        return 1;
    }
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
    try {
        auto ckpt = load_checkpoint(args.checkpoint.string());
        const auto cfg = config_from_checkpoint(ckpt);
        set_threads(cfg.threads);
        auto& bundle = ckpt.bundle;

        const auto samples = select_split(build_dataset(cfg, args.data.value_or(cfg.data.source)), cfg, args.split);
        const auto z_count = args.z_count.value_or(cfg.eval_z_count);
        const auto noise = eval::sample_noise(z_count, cfg.model.noise_dim, args.seed);
        auto model = as_sr_model(bundle.generator);

        const auto batch = data::make_batch(samples);
        const auto n = batch.lr.size(0);
        auto sr = model(batch.lr, torch::zeros({n, cfg.model.noise_dim})).image;
        auto nearest = imagecore::upscale_nearest(batch.lr, cfg.model.scale_factor);

        eval::MetricsReport report;
        double nearest_psnr = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            report.psnr += eval::psnr(sr[i], batch.hr[i]);
            report.ssim += eval::ssim(sr[i], batch.hr[i]);
            report.perceptual += eval::perceptual_distance(sr[i], batch.hr[i], *bundle.extractor);
            nearest_psnr += eval::psnr(nearest[i], batch.hr[i]);
        }
        report.psnr /= static_cast<double>(n);
        report.ssim /= static_cast<double>(n);
        report.perceptual /= static_cast<double>(n);
        nearest_psnr /= static_cast<double>(n);
        report.consistency_violation_rate =
            eval::consistency_violation_rate(model, batch.lr, noise, cfg.train.weights.epsilon);
        report.diversity = z_count >= 2 ? eval::diversity_score(model, batch.lr, noise) : 0.0;

        auto json = report.to_json();
        json["nearest_psnr"] = nearest_psnr;
        json["num_samples"] = n;
        json["split"] = args.split;
        json["step"] = bundle.step;
        const auto text = json.dump(2) + "\n";
        if (args.out && !args.out->empty()) {
            const fs::path path = *args.out;
            if (path.has_parent_path()) fs::create_directories(path.parent_path());
            std::ofstream f(path, std::ios::trunc);
            if (!f) throw IoError("cannot write " + path.string());
            f << text;
        } else {
            out << text;
        }
        return 0;
    } catch (const std::exception& e) {
        err << "eval: " << e.what() << "\n";
        return 1;
    }
}

int cmd_hallucinate(const HallucinateArgs& args, std::ostream& out, std::ostream& err) {
    try {
        if (args.z_count < 0) throw ConfigError("--z-count must be non-negative");
        auto ckpt = load_checkpoint(args.checkpoint.string());
        const auto cfg = config_from_checkpoint(ckpt);
        set_threads(cfg.threads);
        const auto& m = cfg.model;

        std::string dir_name = args.out_dir.value_or("");
        if (dir_name.empty()) {
            const char* env = std::getenv(kOutEnv);
            dir_name = env && *env ? env : "hallucsr_out";
        }
        const fs::path dir = dir_name;
        auto lr = image_io::read_square_image(args.image.string(), m.lr_size).unsqueeze(0);
        if (lr.size(1) != m.image_channels) lr = lr.mean(1, true).expand({1, m.image_channels, m.lr_size, m.lr_size});

        OutputLock lock(dir);
        auto model = as_sr_model(ckpt.bundle.generator);
        auto sr = model(lr, torch::zeros({1, m.noise_dim})).image;
        image_io::write_png((dir / "sr.png").string(), sr);

        if (args.z_count > 0) {
            std::vector<torch::Tensor> row{imagecore::upscale_nearest(lr, m.scale_factor), sr};
            int64_t k = 0;
            for (const auto& z : eval::sample_noise(args.z_count, m.noise_dim, args.seed)) {
                auto h = model(lr, z.view({1, -1})).image;
                char name[32];
                std::snprintf(name, sizeof name, "halluc_%03lld.png", static_cast<long long>(k++));
                image_io::write_png((dir / name).string(), h);
                row.push_back(h);
            }
            image_io::write_png((dir / "grid.png").string(), torch::cat(row, 3));
        }
        out << "wrote " << (args.z_count + 1) << " images to " << dir.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "hallucinate: " << e.what() << "\n";
        return 1;
    }
}

} // namespace hallucsr::commands
