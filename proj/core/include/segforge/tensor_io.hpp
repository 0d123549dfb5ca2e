#pragma once

#include <string>

#include "segforge/tensor.hpp"

namespace segforge {

// Raw tensor file (.sgt): magic "SGFT", version u16 = 1, little-endian.
// Layout: u8 dtype code (0 = float32, 1 = quant8), u8 rank, rank x u32 dims,
// for quant8 a f32 scale and f32 minimum, then the payload row-major.
// Round-trips are bitwise identities.
Tensor read_tensor(const std::string& path);
void write_tensor(const Tensor& t, const std::string& path);

// In-memory codec used by the file functions (and handy for tests).
std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::string& bytes, const std::string& what = "tensor");

}  // namespace segforge
