#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "segrefine/tensor.hpp"

namespace segrefine {

using Rgb = std::array<std::uint8_t, 3>;

// Bit-interleaved class palette (the PASCAL VOC colour map).
Rgb class_color(std::size_t index);

// Writes an i64 H x W label map (values 0..255) as a palette-indexed PNG.
void write_label_png(const std::filesystem::path& path, const Tensor& labels);

// Writes an i64 H x W segment map as an RGB PNG with hashed per-id colours.
void write_segments_png(const std::filesystem::path& path, const Tensor& segments);

}  // namespace segrefine
