#pragma once

#include <filesystem>

#include "dropspread/tensor.hpp"

namespace dropspread {

/// 8-bit colour file -> 3 x H x W tensor in RGB order, values in [0, 1].
Tensor read_image(const std::filesystem::path& path);

/// Single-channel annotation -> mask; pixel >= threshold is wet.
BinaryMask read_mask(const std::filesystem::path& path, int threshold = 128);

/// Writes a 3-channel [0, 1] RGB tensor (or 1-channel grey) as 8-bit, format from the extension.
void write_image(const std::filesystem::path& path, const Tensor& image);

/// Writes 0 (dry) / 255 (wet).
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

Tensor resize_bilinear(const Tensor& image, int height, int width);
BinaryMask resize_nearest(const BinaryMask& mask, int height, int width);

}  // namespace dropspread
