#pragma once

#include <filesystem>

#include "anlcl/tensor.hpp"

namespace anlcl {

// Decodes a PNG or JPEG file to values in [0,1]. Grayscale stays 1 channel,
// color becomes 3; alpha channels are dropped.
Image load_image(const std::filesystem::path& path);

// Writes an 8-bit PNG (1 or 3 channels). Values are clamped to [0,1].
void save_image(const std::filesystem::path& path, const Image& img);

}  // namespace anlcl
