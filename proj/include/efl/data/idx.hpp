// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include "efl/data/dataset.hpp"

namespace efl::data {

inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;

/// Reads an unsigned-byte IDX image file (N x rows x cols) and its label
/// file. Pixels are scaled to [0,1]; samples have shape (N, 1, rows, cols).
/// Labels determine num_classes (max label + 1, at least 10).
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// Reads only the image file; used when labels are not needed.
Tensor load_idx_images(const std::filesystem::path& images_path);

/// Writes a (N, 1, rows, cols) dataset with values in [0,1] as an IDX pair,
/// quantizing pixels to round(255 * v).
void write_idx(const Dataset& ds, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

}  // namespace efl::data
