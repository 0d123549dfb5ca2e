#include "segforge/tensor.hpp"

#include <cstring>
#include <sstream>
#include <stdexcept>

namespace segforge {

const char* dtype_name(DType d) { return d == DType::Float32 ? "float32" : "quant8"; }

int64_t shape_elem_count(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.f32.assign(static_cast<size_t>(shape_elem_count(t.shape)), 0.0f);
  return t;
}

Tensor Tensor::from_values(std::vector<int64_t> shape, std::vector<float> values) {
  if (shape_elem_count(shape) != static_cast<int64_t>(values.size()))
    throw std::invalid_argument("Tensor::from_values: " + shape_to_string(shape) + " needs " +
                                std::to_string(shape_elem_count(shape)) + " values, got " +
                                std::to_string(values.size()));
  Tensor t;
  t.shape = std::move(shape);
  t.f32 = std::move(values);
  return t;
}

int64_t Tensor::elem_count() const { return shape_elem_count(shape); }

float& Tensor::at(int64_t i, int64_t j, int64_t c) {
  return f32[static_cast<size_t>((i * shape[1] + j) * shape[2] + c)];
}

float Tensor::at(int64_t i, int64_t j, int64_t c) const {
  return f32[static_cast<size_t>((i * shape[1] + j) * shape[2] + c)];
}

float Tensor::value_at(int64_t flat_index) const {
  if (dtype == DType::Float32) return f32[static_cast<size_t>(flat_index)];
  return quant.dequant(q8[static_cast<size_t>(flat_index)]);
}

bool Tensor::same_bits(const Tensor& other) const {
  if (shape != other.shape || dtype != other.dtype) return false;
  if (dtype == DType::Float32)
    return f32.size() == other.f32.size() &&
           std::memcmp(f32.data(), other.f32.data(), f32.size() * sizeof(float)) == 0;
  return quant == other.quant && q8 == other.q8;
}

void Tensor::check_invariants() const {
  const int64_t n = elem_count();
  for (int64_t d : shape)
    if (d < 0) throw std::logic_error("tensor has negative dimension " + shape_to_string(shape));
  if (dtype == DType::Float32) {
    if (static_cast<int64_t>(f32.size()) != n)
      throw std::logic_error("float32 buffer size " + std::to_string(f32.size()) +
                             " != element count " + std::to_string(n));
  } else {
    if (static_cast<int64_t>(q8.size()) != n)
      throw std::logic_error("quant8 buffer size " + std::to_string(q8.size()) +
                             " != element count " + std::to_string(n));
    if (quant.scale < 0.0f) throw std::logic_error("quant8 scale is negative");
  }
}

Tensor resize_nearest(const Tensor& t, int64_t out_h, int64_t out_w) {
  if (t.rank() != 3)
    throw std::invalid_argument("resize_nearest: expected rank-3 tensor, got " +
                                shape_to_string(t.shape));
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("resize_nearest: target " + std::to_string(out_h) + "x" +
                                std::to_string(out_w) + " has a zero or negative dimension");
  const int64_t in_h = t.shape[0], in_w = t.shape[1], ch = t.shape[2];
  Tensor out;
  out.shape = {out_h, out_w, ch};
  out.dtype = t.dtype;
  out.quant = t.quant;
  const size_t n = static_cast<size_t>(out_h * out_w * ch);
  if (t.dtype == DType::Float32)
    out.f32.resize(n);
  else
    out.q8.resize(n);
  for (int64_t i = 0; i < out_h; ++i) {
    const int64_t si = i * in_h / out_h;
    for (int64_t j = 0; j < out_w; ++j) {
      const int64_t sj = j * in_w / out_w;
      const size_t src = static_cast<size_t>((si * in_w + sj) * ch);
      const size_t dst = static_cast<size_t>((i * out_w + j) * ch);
      if (t.dtype == DType::Float32)
        std::memcpy(&out.f32[dst], &t.f32[src], static_cast<size_t>(ch) * sizeof(float));
      else
        std::memcpy(&out.q8[dst], &t.q8[src], static_cast<size_t>(ch));
    }
  }
  return out;
}

Tensor argmax_channels(const Tensor& logits) {
  if (logits.rank() != 3)
    throw std::invalid_argument("argmax_channels: expected rank-3 tensor, got " +
                                shape_to_string(logits.shape));
  const int64_t h = logits.shape[0], w = logits.shape[1], ch = logits.shape[2];
  Tensor out = Tensor::zeros({h, w, 1});
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < w; ++j) {
      int64_t best = 0;
      float best_v = logits.at(i, j, 0);
      for (int64_t c = 1; c < ch; ++c) {
        const float v = logits.at(i, j, c);
        if (v > best_v) {  // strict: ties keep the lowest class index
          best_v = v;
          best = c;
        }
      }
      out.at(i, j, 0) = static_cast<float>(best);
    }
  }
  return out;
}

}  // namespace segforge
