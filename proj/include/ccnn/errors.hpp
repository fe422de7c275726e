// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ccnn {

/// Shape or dimension disagreement between tensors/operands.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// A caller violated an API precondition (empty sequence, unsorted boxes, ...).
class ContractError : public std::invalid_argument {
public:
    explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

/// Geometrically invalid box (zero or negative area).
class InvalidBoxError : public std::invalid_argument {
public:
    explicit InvalidBoxError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed on-disk data. Carries the byte offset where parsing gave up.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, long byte_offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    long offset;
};

/// A sampler could not satisfy its constraints within the attempt budget.
class FeasibilityError : public std::runtime_error {
public:
    FeasibilityError(const std::string& what, int achieved_count)
        : std::runtime_error(what + " (achieved " + std::to_string(achieved_count) + ")"),
          achieved(achieved_count) {}
    int achieved;
};

/// IO failure (missing file, unwritable directory).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ccnn
