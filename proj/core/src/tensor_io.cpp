#include "segforge/tensor_io.hpp"

#include <stdexcept>

#include "binio.hpp"

namespace segforge {

namespace {
constexpr char kMagic[4] = {'S', 'G', 'F', 'T'};
constexpr uint16_t kVersion = 1;
}  // namespace

std::string encode_tensor(const Tensor& t) {
  t.check_invariants();
  detail::ByteWriter w;
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  w.u8(static_cast<uint8_t>(t.dtype));
  w.u8(static_cast<uint8_t>(t.rank()));
  for (int64_t d : t.shape) w.u32(static_cast<uint32_t>(d));
  if (t.dtype == DType::Quant8) {
    w.f32(t.quant.scale);
    w.f32(t.quant.minimum);
    w.bytes(t.q8.data(), t.q8.size());
  } else {
    w.bytes(t.f32.data(), t.f32.size() * sizeof(float));
  }
  return w.data();
}

Tensor decode_tensor(const std::string& bytes, const std::string& what) {
  detail::ByteReader r(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size(), what);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) r.fail("magic mismatch (want SGFT)");
  const uint16_t version = r.u16();
  if (version != kVersion)
    r.fail("unsupported version " + std::to_string(version) + " (want " +
           std::to_string(kVersion) + ")");
  const uint8_t dtype_code = r.u8();
  if (dtype_code > 1) r.fail("unknown dtype code " + std::to_string(dtype_code));
  const uint8_t rank = r.u8();

  Tensor t;
  t.dtype = static_cast<DType>(dtype_code);
  t.shape.resize(rank);
  for (auto& d : t.shape) d = r.u32();
  const size_t n = static_cast<size_t>(t.elem_count());
  if (t.dtype == DType::Quant8) {
    t.quant.scale = r.f32();
    t.quant.minimum = r.f32();
    t.q8.resize(n);
    r.bytes(t.q8.data(), n);
  } else {
    t.f32.resize(n);
    r.bytes(t.f32.data(), n * sizeof(float));
  }
  if (!r.at_end()) r.fail(std::to_string(r.remaining()) + " trailing bytes");
  return t;
}

Tensor read_tensor(const std::string& path) {
  return decode_tensor(detail::read_file(path), path);
}

void write_tensor(const Tensor& t, const std::string& path) {
  detail::write_file(path, encode_tensor(t));
}

}  // namespace segforge
