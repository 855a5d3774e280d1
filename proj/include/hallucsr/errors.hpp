// Copyright (c) 2026 The hallucsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace hallucsr {

// Raised when an argument has the wrong rank, size or channel count.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Image too small for a stencil or window.
class DimensionError : public ShapeError {
public:
    using ShapeError::ShapeError;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Two noise vectors too close for the diversity ratio.
class DegenerateNoiseError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class NonFiniteError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or unreadable archive (checkpoints, extractor weights).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace hallucsr
