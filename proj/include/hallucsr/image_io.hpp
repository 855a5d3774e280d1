// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

// 8-bit image files <-> float tensors. Pixel values map linearly between
// [0, 255] and [-1, 1] via v' = 2v/255 - 1.
namespace hallucsr::image_io {

// Decode a PNG/JPEG into a (3, H, W) float32 RGB tensor. Throws IoError.
torch::Tensor read_image(const std::string& path);

// Decode, center-crop to a square and area-resample to size x size.
torch::Tensor read_square_image(const std::string& path, int64_t size);

// (C, H, W) or (1, C, H, W), C in {1, 3}, values clamped to [-1, 1].
std::vector<uint8_t> encode_png(const torch::Tensor& image);
void write_png(const std::string& path, const torch::Tensor& image);

torch::Tensor to_unit_range(const torch::Tensor& bytes_u8);
torch::Tensor to_bytes(const torch::Tensor& image);

} // namespace hallucsr::image_io
