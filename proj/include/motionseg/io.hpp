#pragma once

#include <filesystem>

#include "motionseg/types.hpp"

namespace motionseg {

// Middlebury .flo: float 202021.25, int32 width, int32 height, then
// row-major interleaved (u, v) float32, all little-endian.
inline constexpr float kFloMagic = 202021.25f;

FlowField read_flo(const std::filesystem::path& path);
void write_flo(const FlowField& field, const std::filesystem::path& path);

// Label maps: binary PGM (P5), maxval 65535, big-endian samples.
LabelMap read_label_map(const std::filesystem::path& path);
void write_label_map(const LabelMap& map, const std::filesystem::path& path);

// Binary masks: 8-bit P5, 0 / 255. Any nonzero sample reads as set.
BinaryMask read_binary_mask(const std::filesystem::path& path);
void write_binary_mask(const BinaryMask& mask, const std::filesystem::path& path);

}  // namespace motionseg
