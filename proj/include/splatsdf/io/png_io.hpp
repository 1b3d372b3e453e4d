#pragma once

#include <string>

#include "splatsdf/core/image.hpp"

namespace splatsdf::io {

// Reads an 8- or 16-bit gray/RGB/RGBA PNG into floats scaled to [0,1].
Image read_png(const std::string& path);

// Writes 8-bit PNG (1 or 3 channels); values clamped to [0,1].
void write_png8(const std::string& path, const Image& img);

// Writes 16-bit PNG (1 or 3 channels); values clamped to [0,1].
void write_png16(const std::string& path, const Image& img);

// Normal map convention: unit vectors mapped [-1,1] -> [0,1] per channel,
// stored as 16-bit RGB. Zero vectors mark invalid pixels.
Image encode_normal_map(const Image& normals);
Image decode_normal_map(const Image& encoded);

}  // namespace splatsdf::io
