#pragma once

#include <cstdint>
#include <filesystem>

#include "neuracodec/tensor.hpp"

namespace neuracodec {

// 8-bit PNG (grey, RGB or palette) or binary PPM (P6, maxval 255). Samples
// become v / 255 in channel-major order; greyscale loads as one channel.
ImageTensor load_image(const std::filesystem::path& path);

bool is_image_file(const std::filesystem::path& path);

// Writes a plain [0,1] image as 8-bit PNG, round(v * 255).
void save_png(const ImageTensor& image, const std::filesystem::path& path);

// Display level for an encrypted sample: round-half-up of
// (v - lo) / (hi - lo) * 255, clamped to [0, 255].
std::uint8_t display_level(float v, float lo, float hi);

// Visualisation only: lossy 8-bit PNG of an encrypted image using a fixed
// [lo, hi] window. Requires hi > lo and 1 or 3 channels.
void export_png(const ImageTensor& image, float lo, float hi, const std::filesystem::path& path);

}  // namespace neuracodec
