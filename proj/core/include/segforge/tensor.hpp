#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace segforge {

enum class DType : uint8_t {
  Float32 = 0,
  Quant8 = 1,
};

inline size_t dtype_size(DType d) { return d == DType::Float32 ? 4 : 1; }
const char* dtype_name(DType d);

// Affine 8-bit parameters: real = minimum + scale * q, q in [0, 255].
struct QuantParams {
  float scale = 0.0f;
  float minimum = 0.0f;

  float dequant(uint8_t q) const { return minimum + scale * static_cast<float>(q); }
  bool operator==(const QuantParams&) const = default;
};

// Dense H x W x C value (rank is free in general; FCN activations are rank 3).
// Tensors are immutable once handed to a Graph or the executor; builders fill
// them in place before that.
struct Tensor {
  std::vector<int64_t> shape;
  DType dtype = DType::Float32;
  std::vector<float> f32;    // element buffer when dtype == Float32
  std::vector<uint8_t> q8;   // element buffer when dtype == Quant8
  QuantParams quant;         // meaningful only when dtype == Quant8

  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> shape);
  static Tensor from_values(std::vector<int64_t> shape, std::vector<float> values);

  int64_t elem_count() const;
  size_t byte_size() const { return static_cast<size_t>(elem_count()) * dtype_size(dtype); }
  int64_t dim(size_t i) const { return shape.at(i); }
  size_t rank() const { return shape.size(); }

  // Rank-3 accessors (H, W, C).
  float& at(int64_t i, int64_t j, int64_t c);
  float at(int64_t i, int64_t j, int64_t c) const;

  // Element as float regardless of dtype (dequantizes Quant8).
  float value_at(int64_t flat_index) const;

  bool same_bits(const Tensor& other) const;
  bool operator==(const Tensor& other) const { return same_bits(other); }

  void check_invariants() const;  // throws std::logic_error on violation
};

int64_t shape_elem_count(const std::vector<int64_t>& shape);
std::string shape_to_string(const std::vector<int64_t>& shape);

// Nearest-neighbor resize of a rank-3 tensor; out(i,j,c) = in(floor(i*H/out_h),
// floor(j*W/out_w), c). Top-left index convention.
Tensor resize_nearest(const Tensor& t, int64_t out_h, int64_t out_w);

// Lowest-index argmax over the channel axis; returns [H, W, 1] float32 with
// integral class indices.
Tensor argmax_channels(const Tensor& logits);

}  // namespace segforge
