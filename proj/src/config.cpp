// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/config.hpp"

#include "hallucsr/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <variant>

namespace hallucsr {

void RunConfig::validate() const {
    model.validate();
    train.validate();
    if (data.synthetic_count <= 0) throw ConfigError("data.synthetic_count must be positive");
    if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
        throw ConfigError("data.train_fraction must lie strictly between 0 and 1");
    }
    if (threads < 1) throw ConfigError("run.threads must be at least 1");
    if (grid_z_count < 0 || eval_z_count < 2) {
        throw ConfigError("run.grid_z_count must be >= 0 and run.eval_z_count >= 2");
    }
    if (extractor.stage_widths.empty()) throw ConfigError("extractor.stage_widths must not be empty");
}

namespace config {

namespace {

// uint64_t only holds integers above the int64 range (large seeds).
using Value = std::variant<int64_t, double, bool, std::string, std::vector<int64_t>, uint64_t>;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Drop a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
    bool in_string = false;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
        if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
}

template <typename Int>
bool parse_int(const std::string& s, Int& out) {
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end;
}

Value parse_value(const std::string& raw) {
    const auto s = trim(raw);
    if (s.empty()) throw ConfigError("missing value");
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"') throw ConfigError("unterminated string " + s);
        std::string out;
        for (size_t i = 1; i + 1 < s.size(); ++i) {
            if (s[i] == '\\' && i + 2 < s.size()) {
                const char c = s[++i];
                out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
            } else {
                out += s[i];
            }
        }
        return out;
    }
    if (s == "true") return true;
    if (s == "false") return false;
    if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError("unterminated array " + s);
        std::vector<int64_t> items;
        std::stringstream ss(s.substr(1, s.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            int64_t v = 0;
            if (!parse_int(item, v)) throw ConfigError("array items must be integers: " + s);
            items.push_back(v);
        }
        return items;
    }
    std::string digits;
    for (char c : s) {
        if (c != '_') digits += c;
    }
    int64_t i = 0;
    if (parse_int(digits, i)) return i;
    uint64_t u = 0;
    if (parse_int(digits, u)) return u;
    try {
        size_t used = 0;
        const double d = std::stod(digits, &used);
        if (used == digits.size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError("cannot parse value " + s);
}

std::string format_float(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out + "\"";
}

struct Field {
    std::string key; // "section.name"
    std::function<void(RunConfig&, const Value&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field int_field(std::string key, T RunConfig::*outer, int64_t T::*inner) {
    return {key,
            [=, k = key](RunConfig& c, const Value& v) {
                if (!std::holds_alternative<int64_t>(v)) throw ConfigError(k + " expects an integer");
                (c.*outer).*inner = std::get<int64_t>(v);
            },
            [=](const RunConfig& c) { return std::to_string((c.*outer).*inner); }};
}

template <typename T>
Field seed_field(std::string key, T RunConfig::*outer, uint64_t T::*inner) {
    return {key,
            [=, k = key](RunConfig& c, const Value& v) {
                if (std::holds_alternative<uint64_t>(v)) {
                    (c.*outer).*inner = std::get<uint64_t>(v);
                    return;
                }
                if (!std::holds_alternative<int64_t>(v) || std::get<int64_t>(v) < 0) {
                    throw ConfigError(k + " expects a non-negative integer");
                }
                (c.*outer).*inner = static_cast<uint64_t>(std::get<int64_t>(v));
            },
            [=](const RunConfig& c) { return std::to_string((c.*outer).*inner); }};
}

template <typename Getter>
Field float_field(std::string key, Getter ref) {
    return {key,
            [=, k = key](RunConfig& c, const Value& v) {
                if (std::holds_alternative<int64_t>(v)) {
                    ref(c) = static_cast<double>(std::get<int64_t>(v));
                } else if (std::holds_alternative<double>(v)) {
                    ref(c) = std::get<double>(v);
                } else {
                    throw ConfigError(k + " expects a number");
                }
            },
            [=](const RunConfig& c) { return format_float(ref(const_cast<RunConfig&>(c))); }};
}

template <typename Getter>
Field string_field(std::string key, Getter ref) {
    return {key,
            [=, k = key](RunConfig& c, const Value& v) {
                if (!std::holds_alternative<std::string>(v)) throw ConfigError(k + " expects a string");
                ref(c) = std::get<std::string>(v);
            },
            [=](const RunConfig& c) { return quote(ref(const_cast<RunConfig&>(c))); }};
}

Field run_int_field(std::string key, int64_t RunConfig::*member) {
    return {key,
            [=, k = key](RunConfig& c, const Value& v) {
                if (!std::holds_alternative<int64_t>(v)) throw ConfigError(k + " expects an integer");
                c.*member = std::get<int64_t>(v);
            },
            [=](const RunConfig& c) { return std::to_string(c.*member); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        using GC = GeneratorConfig;
        f.push_back(int_field("model.lr_size", &RunConfig::model, &GC::lr_size));
        f.push_back(int_field("model.scale_factor", &RunConfig::model, &GC::scale_factor));
        f.push_back(int_field("model.base_channels", &RunConfig::model, &GC::base_channels));
        f.push_back(int_field("model.min_channels", &RunConfig::model, &GC::min_channels));
        f.push_back(int_field("model.num_residual_blocks", &RunConfig::model, &GC::num_residual_blocks));
        f.push_back(int_field("model.disc_residual_blocks", &RunConfig::model, &GC::disc_residual_blocks));
        f.push_back(int_field("model.noise_dim", &RunConfig::model, &GC::noise_dim));
        f.push_back(int_field("model.image_channels", &RunConfig::model, &GC::image_channels));
        f.push_back(float_field("model.leak", [](RunConfig& c) -> double& { return c.model.leak; }));
        f.push_back(string_field("model.residual_norm", [](RunConfig& c) -> std::string& { return c.model.residual_norm; }));

        f.push_back(seed_field("extractor.seed", &RunConfig::extractor, &ExtractorConfig::seed));
        f.push_back({"extractor.stage_widths",
                     [](RunConfig& c, const Value& v) {
                         if (!std::holds_alternative<std::vector<int64_t>>(v)) {
                             throw ConfigError("extractor.stage_widths expects an integer array");
                         }
                         c.extractor.stage_widths = std::get<std::vector<int64_t>>(v);
                     },
                     [](const RunConfig& c) {
                         std::string s = "[";
                         for (size_t i = 0; i < c.extractor.stage_widths.size(); ++i) {
                             s += (i ? ", " : "") + std::to_string(c.extractor.stage_widths[i]);
                         }
                         return s + "]";
                     }});
        f.push_back(float_field("extractor.leak", [](RunConfig& c) -> double& { return c.extractor.leak; }));
        f.push_back(string_field("extractor.weights_path",
                                 [](RunConfig& c) -> std::string& { return c.extractor.weights_path; }));

        f.push_back(float_field("loss.gamma", [](RunConfig& c) -> double& { return c.train.weights.gamma; }));
        f.push_back(float_field("loss.beta", [](RunConfig& c) -> double& { return c.train.weights.beta; }));
        f.push_back(float_field("loss.alpha", [](RunConfig& c) -> double& { return c.train.weights.alpha; }));
        f.push_back(float_field("loss.tau", [](RunConfig& c) -> double& { return c.train.weights.tau; }));
        f.push_back(float_field("loss.epsilon", [](RunConfig& c) -> double& { return c.train.weights.epsilon; }));
        f.push_back(float_field("loss.r1_coeff", [](RunConfig& c) -> double& { return c.train.weights.r1_coeff; }));

        using TC = TrainConfig;
        f.push_back(float_field("train.lr_generator", [](RunConfig& c) -> double& { return c.train.lr_generator; }));
        f.push_back(float_field("train.lr_discriminator",
                                [](RunConfig& c) -> double& { return c.train.lr_discriminator; }));
        f.push_back(float_field("train.adam_beta1", [](RunConfig& c) -> double& { return c.train.adam_beta1; }));
        f.push_back(float_field("train.adam_beta2", [](RunConfig& c) -> double& { return c.train.adam_beta2; }));
        f.push_back(int_field("train.batch_size", &RunConfig::train, &TC::batch_size));
        f.push_back(int_field("train.total_steps", &RunConfig::train, &TC::total_steps));
        f.push_back(seed_field("train.seed", &RunConfig::train, &TC::seed));
        f.push_back(int_field("train.checkpoint_every", &RunConfig::train, &TC::checkpoint_every));

        f.push_back(string_field("data.source", [](RunConfig& c) -> std::string& { return c.data.source; }));
        f.push_back(int_field("data.synthetic_count", &RunConfig::data, &DataConfig::synthetic_count));
        f.push_back(float_field("data.train_fraction", [](RunConfig& c) -> double& { return c.data.train_fraction; }));

        f.push_back(string_field("run.out_dir", [](RunConfig& c) -> std::string& { return c.out_dir; }));
        f.push_back(run_int_field("run.threads", &RunConfig::threads));
        f.push_back(run_int_field("run.grid_z_count", &RunConfig::grid_z_count));
        f.push_back(run_int_field("run.eval_z_count", &RunConfig::eval_z_count));
        return f;
    }();
    return table;
}

const Field& find_field(const std::string& key) {
    for (const auto& f : fields()) {
        if (f.key == key) return f;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

} // namespace

RunConfig parse_toml(const std::string& text) { return parse_toml(text, RunConfig{}); }

RunConfig parse_toml(const std::string& text, const RunConfig& base) {
    RunConfig c = base;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto s = trim(strip_comment(line));
        if (s.empty()) continue;
        try {
            if (s.front() == '[') {
                if (s.back() != ']') throw ConfigError("malformed section header");
                section = trim(s.substr(1, s.size() - 2));
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("expected key = value");
            const auto key = trim(s.substr(0, eq));
            const auto full = section.empty() ? key : section + "." + key;
            find_field(full).set(c, parse_value(s.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return c;
}

std::string to_toml(const RunConfig& config) {
    std::string out;
    std::string section;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const auto sec = f.key.substr(0, dot);
        if (sec != section) {
            out += (section.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
            section = sec;
        }
        out += f.key.substr(dot + 1) + " = " + f.get(config) + "\n";
    }
    return out;
}

RunConfig load(const std::filesystem::path& path, const RunConfig& base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str(), base);
}

void save(const std::filesystem::path& path, const RunConfig& config) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_toml(config);
}

void apply_override(RunConfig& config, const std::string& dotted_key, const std::string& value) {
    try {
        find_field(dotted_key).set(config, parse_value(value));
    } catch (const ConfigError& e) {
        throw ConfigError("override " + dotted_key + ": " + e.what());
    }
}

std::vector<std::string> known_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

} // namespace config
} // namespace hallucsr
