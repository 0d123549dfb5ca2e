#pragma once

#include <string>

#include "segforge/tensor.hpp"

namespace segforge {

// Binary PNM only: P5 (8-bit grayscale, read as [H,W,1]) and P6 (8-bit RGB,
// [H,W,3]). Max value must be 255. Parse failures report the byte offset.
Tensor read_image_pnm(const std::string& path);

// Writes [H,W,1] as P5 and [H,W,3] as P6; values are rounded and clamped to
// [0, 255]. write(read(f)) reproduces f byte for byte for files this module
// itself wrote.
void write_image_pnm(const Tensor& t, const std::string& path);

}  // namespace segforge
