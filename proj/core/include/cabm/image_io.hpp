#pragma once

#include <string>

#include "cabm/tensor.hpp"

namespace cabm {

// Reads PNG (8-bit, any layout, decoded to RGB) or binary PPM/PGM. Values
// land in [0, 1]; PGM gives a single channel.
TensorF load_image(const std::string& path);

// Writes by extension: .png, .ppm (RGB) or .pgm (single channel). Values are
// clamped to [0, 1] and quantized to 8 bits.
void save_image(const std::string& path, const TensorF& img);

// Replicates a single channel to RGB; RGB passes through.
TensorF ensure_rgb(const TensorF& img);

}  // namespace cabm
