#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "tsgan/imageops.hpp"

namespace tsgan::imageops {

/// Reads a PNG (8/16-bit gray, RGB, RGBA, palette) or binary PGM (P5) file
/// as a (1,3,h,w) image scaled to [0,1]. Gray files are replicated across
/// channels; alpha is dropped.
Image load_image(const std::filesystem::path& path);

/// Same formats, returned as a single (1,1,h,w) plane (luma for color files).
Image load_grayscale(const std::filesystem::path& path);

/// Writes a (1,1,h,w) or (1,3,h,w) image clamped to [0,1] and quantized to
/// 8 bits. Format by extension: ".png" or ".pgm" (PGM is gray-only).
void save_image(const Image& image, const std::filesystem::path& path);

/// 256-entry red-yellow colormap, index = round(255 * value).
const std::array<std::array<std::uint8_t, 3>, 256>& heatmap_colormap();

/// 0.5 * stimulus + 0.5 * colormap(map), as a (1,3,h,w) image.
Image heatmap_overlay(const Image& map, const Image& base);

/// Writes heatmap_overlay(map, base) to `path`.
void save_heatmap(const Image& map, const Image& base, const std::filesystem::path& path);

}  // namespace tsgan::imageops
