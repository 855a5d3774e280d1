// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hallucsr/config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

// The three subcommands, callable in-process. Each returns a process exit code
// and reports failures as a single line on `err`.
namespace hallucsr::commands {

inline constexpr const char* kOutEnv = "HALLUCSR_OUT";

struct TrainArgs {
    std::optional<std::filesystem::path> config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int64_t> steps;
    std::vector<std::pair<std::string, std::string>> sets; // dotted key, value literal
    bool resume = false;                                   // continue from out_dir/checkpoint.hsr
    bool quiet = false;
};

struct EvalArgs {
    std::filesystem::path checkpoint;
    std::optional<std::string> data;   // directory; defaults to the run's data source
    std::optional<std::string> out;    // JSON path; stdout when empty
    std::string split = "test";        // test | train | all
    uint64_t seed = 0;
    std::optional<int64_t> z_count;
};

struct HallucinateArgs {
    std::filesystem::path checkpoint;
    std::filesystem::path image;
    int64_t z_count = 4;
    uint64_t seed = 0;
    std::optional<std::string> out_dir;
};

// Resolve the effective run configuration: built-in defaults, then
// $HALLUCSR_OUT for the output directory, then the config file, then flags.
RunConfig resolve_config(const TrainArgs& args);

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_hallucinate(const HallucinateArgs& args, std::ostream& out, std::ostream& err);

// Exclusive lock on an output directory (created if missing), held through
// a lock file for the lifetime of the object. Throws IoError when taken.
class OutputLock {
public:
    explicit OutputLock(const std::filesystem::path& dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::filesystem::path file_;
    int fd_ = -1;
};

} // namespace hallucsr::commands
