// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/archive.hpp"

#include "hallucsr/errors.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hallucsr {

namespace {

constexpr char kMagic[8] = {'H', 'S', 'R', 'A', 'R', 'C', 'H', '1'};

std::string dtype_name(torch::ScalarType t) {
    switch (t) {
    case torch::kFloat32: return "float32";
    case torch::kFloat64: return "float64";
    case torch::kInt64: return "int64";
    case torch::kUInt8: return "uint8";
    default: throw FormatError(std::string("archive: unsupported dtype ") + c10::toString(t));
    }
}

torch::ScalarType dtype_from(const std::string& name) {
    if (name == "float32") return torch::kFloat32;
    if (name == "float64") return torch::kFloat64;
    if (name == "int64") return torch::kInt64;
    if (name == "uint8") return torch::kUInt8;
    throw FormatError("archive: unknown dtype '" + name + "'");
}

} // namespace

std::string serialize_archive(const Archive& archive) {
    nlohmann::json header;
    header["meta"] = archive.meta;
    header["arrays"] = nlohmann::json::array();
    header["blobs"] = nlohmann::json::array();

    std::string payload;
    for (const auto& [name, tensor] : archive.arrays) {
        auto t = tensor.detach().cpu().contiguous();
        const auto nbytes = static_cast<uint64_t>(t.numel() * t.element_size());
        header["arrays"].push_back({{"name", name},
                                    {"dtype", dtype_name(t.scalar_type())},
                                    {"shape", t.sizes().vec()},
                                    {"offset", payload.size()},
                                    {"nbytes", nbytes}});
        payload.append(static_cast<const char*>(t.data_ptr()), nbytes);
    }
    for (const auto& [name, blob] : archive.blobs) {
        header["blobs"].push_back({{"name", name}, {"offset", payload.size()}, {"nbytes", blob.size()}});
        payload.append(blob);
    }

    const std::string text = header.dump();
    const uint64_t len = text.size();
    std::string out(kMagic, sizeof kMagic);
    out.append(reinterpret_cast<const char*>(&len), sizeof len);
    out += text;
    out += payload;
    return out;
}

Archive parse_archive(const std::string& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw FormatError("archive: bad magic");
    }
    uint64_t len = 0;
    std::memcpy(&len, bytes.data() + 8, sizeof len);
    if (len > bytes.size() - 16) throw FormatError("archive: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("archive: corrupt header: ") + e.what());
    }
    const size_t base = 16 + len;
    const size_t payload_size = bytes.size() - base;

    Archive archive;
    try {
        archive.meta = header.at("meta");
        for (const auto& entry : header.at("arrays")) {
            const auto name = entry.at("name").get<std::string>();
            const auto offset = entry.at("offset").get<uint64_t>();
            const auto nbytes = entry.at("nbytes").get<uint64_t>();
            const auto shape = entry.at("shape").get<std::vector<int64_t>>();
            const auto dtype = dtype_from(entry.at("dtype").get<std::string>());
            if (offset > payload_size || nbytes > payload_size - offset) {
                throw FormatError("archive: array '" + name + "' exceeds payload");
            }
            auto t = torch::empty(shape, torch::TensorOptions().dtype(dtype));
            if (static_cast<uint64_t>(t.numel() * t.element_size()) != nbytes) {
                throw FormatError("archive: array '" + name + "' size does not match its shape");
            }
            std::memcpy(t.data_ptr(), bytes.data() + base + offset, nbytes);
            archive.arrays.emplace(name, std::move(t));
        }
        for (const auto& entry : header.at("blobs")) {
            const auto name = entry.at("name").get<std::string>();
            const auto offset = entry.at("offset").get<uint64_t>();
            const auto nbytes = entry.at("nbytes").get<uint64_t>();
            if (offset > payload_size || nbytes > payload_size - offset) {
                throw FormatError("archive: blob '" + name + "' exceeds payload");
            }
            archive.blobs.emplace(name, bytes.substr(base + offset, nbytes));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("archive: malformed header: ") + e.what());
    }
    return archive;
}

void write_archive(const std::string& path, const Archive& archive) {
    const auto bytes = serialize_archive(archive);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("failed writing " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

Archive read_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_archive(ss.str());
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

} // namespace hallucsr
