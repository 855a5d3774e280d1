// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace hallucsr::commands;

    CLI::App app{"hallucsr: one-to-many super-resolution (reconstruct with z = 0, hallucinate otherwise)"};
    app.require_subcommand(1);

    TrainArgs train;
    std::string config_path;
    uint64_t train_seed = 0;
    std::string train_out;
    int64_t steps = 0;
    std::vector<std::string> sets;
    auto* t = app.add_subcommand("train", "train a model (zero-config: desk-scale synthetic run)");
    auto* opt_config = t->add_option("--config", config_path, "TOML run configuration")->check(CLI::ExistingFile);
    auto* opt_seed = t->add_option("--seed", train_seed, "root seed");
    auto* opt_out = t->add_option("--out", train_out, "output directory (default $HALLUCSR_OUT)");
    auto* opt_steps = t->add_option("--steps", steps, "total training steps");
    t->add_option("--set", sets, "override a config key, e.g. --set loss.alpha=0");
    t->add_flag("--resume", train.resume, "continue from <out>/checkpoint.hsr");
    t->add_flag("--quiet", train.quiet, "no progress output");

    EvalArgs ev;
    std::string ev_ckpt, ev_data, ev_out;
    int64_t ev_z = 0;
    auto* e = app.add_subcommand("eval", "write a metrics report for a checkpoint");
    e->add_option("--checkpoint", ev_ckpt, "checkpoint archive")->required();
    auto* opt_data = e->add_option("--data", ev_data, "image directory (default: the run's data source)");
    auto* opt_eout = e->add_option("--out", ev_out, "JSON report path (default: stdout)");
    e->add_option("--split", ev.split, "test | train | all")->check(CLI::IsMember({"test", "train", "all"}));
    e->add_option("--seed", ev.seed, "seed for z sampling");
    auto* opt_ez = e->add_option("--z-count", ev_z, "noise samples for diversity/consistency");

    HallucinateArgs ha;
    std::string ha_ckpt, ha_image, ha_out;
    auto* h = app.add_subcommand("hallucinate", "super-resolve one image and sample hallucinations");
    h->add_option("--checkpoint", ha_ckpt, "checkpoint archive")->required();
    h->add_option("image", ha_image, "input (low-resolution) image")->required();
    h->add_option("--z-count", ha.z_count, "number of hallucinations");
    h->add_option("--seed", ha.seed, "seed for z sampling");
    auto* opt_hout = h->add_option("--out", ha_out, "output directory (default $HALLUCSR_OUT)");

    CLI11_PARSE(app, argc, argv);

    if (t->parsed()) {
        if (*opt_config) train.config_path = config_path;
        if (*opt_seed) train.seed = train_seed;
        if (*opt_out) train.out_dir = train_out;
        if (*opt_steps) train.steps = steps;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                std::cerr << "train: --set expects key=value, got '" << s << "'\n";
                return 2;
            }
            train.sets.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        return cmd_train(train, std::cout, std::cerr);
    }
    if (e->parsed()) {
        ev.checkpoint = ev_ckpt;
        if (*opt_data) ev.data = ev_data;
        if (*opt_eout) ev.out = ev_out;
        if (*opt_ez) ev.z_count = ev_z;
        return cmd_eval(ev, std::cout, std::cerr);
    }
    ha.checkpoint = ha_ckpt;
    ha.image = ha_image;
    if (*opt_hout) ha.out_dir = ha_out;
    return cmd_hallucinate(ha, std::cout, std::cerr);
}
