// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "hallucsr/image_io.hpp"

#include "hallucsr/errors.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <fstream>

namespace hallucsr::image_io {

namespace {

cv::Mat decode(const std::string& path) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError("cannot decode image " + path);
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    return rgb;
}

torch::Tensor from_mat(const cv::Mat& rgb) {
    auto hwc = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3},
                                {static_cast<int64_t>(rgb.step[0]), 3, 1}, torch::kUInt8);
    return to_unit_range(hwc.permute({2, 0, 1}).contiguous());
}

} // namespace

torch::Tensor to_unit_range(const torch::Tensor& bytes_u8) {
    return bytes_u8.to(torch::kFloat32).mul(2.0).div(255.0).sub(1.0);
}

torch::Tensor to_bytes(const torch::Tensor& image) {
    return image.detach().to(torch::kFloat64).clamp(-1.0, 1.0).add(1.0).mul(127.5).round().to(torch::kUInt8);
}

torch::Tensor read_image(const std::string& path) {
    return from_mat(decode(path));
}

torch::Tensor read_square_image(const std::string& path, int64_t size) {
    cv::Mat rgb = decode(path);
    const int side = std::min(rgb.rows, rgb.cols);
    cv::Mat crop = rgb(cv::Rect((rgb.cols - side) / 2, (rgb.rows - side) / 2, side, side));
    cv::Mat resized;
    if (side == size) {
        resized = crop.clone();
    } else {
        cv::resize(crop, resized, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0, cv::INTER_AREA);
    }
    return from_mat(resized);
}

std::vector<uint8_t> encode_png(const torch::Tensor& image) {
    auto x = image.dim() == 4 ? image.squeeze(0) : image;
    if (x.dim() != 3 || (x.size(0) != 1 && x.size(0) != 3)) {
        throw ShapeError("encode_png expects a (C, H, W) image with 1 or 3 channels");
    }
    auto hwc = to_bytes(x).permute({1, 2, 0}).contiguous();
    const int rows = static_cast<int>(hwc.size(0));
    const int cols = static_cast<int>(hwc.size(1));
    cv::Mat mat;
    if (x.size(0) == 3) {
        cv::Mat rgb(rows, cols, CV_8UC3, hwc.data_ptr<uint8_t>());
        cv::cvtColor(rgb, mat, cv::COLOR_RGB2BGR);
    } else {
        mat = cv::Mat(rows, cols, CV_8UC1, hwc.data_ptr<uint8_t>()).clone();
    }
    std::vector<uint8_t> buf;
    if (!cv::imencode(".png", mat, buf)) throw IoError("PNG encoding failed");
    return buf;
}

void write_png(const std::string& path, const torch::Tensor& image) {
    const auto buf = encode_png(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing " + path);
}

} // namespace hallucsr::image_io
