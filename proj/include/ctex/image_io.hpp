#pragma once

#include <filesystem>

#include "ctex/image.hpp"

namespace ctex {

// 8-bit image IO. Intensities are normalized by 1/255 on load and written
// back as round(x * 255) clamped to [0, 255]. PNG supports 1- and 3-channel
// images; PPM is binary P6 with maxval 255 (3 channels; grayscale images are
// written with the channel replicated). Format is chosen by extension
// (.png, .ppm). Errors name the offending file.
Image load_image(const std::filesystem::path& path);
void save_image(const Image& img, const std::filesystem::path& path);

Image load_png(const std::filesystem::path& path);
void save_png(const Image& img, const std::filesystem::path& path);

Image load_ppm(const std::filesystem::path& path);
void save_ppm(const Image& img, const std::filesystem::path& path);

inline std::uint8_t quantize_u8(double x) {
    double v = x * 255.0 + 0.5;
    if (v < 0.0) v = 0.0;
    if (v > 255.0) v = 255.0;
    return static_cast<std::uint8_t>(v);
}

}  // namespace ctex
