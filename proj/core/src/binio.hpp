#pragma once

// Internal little-endian byte stream helpers shared by the tensor and model
// file codecs. Not installed.

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace segforge::detail {

class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(uint16_t v) { raw(&v, 2); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void i64(int64_t v) { raw(&v, 8); }
  void f32(float v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void bytes(const void* p, size_t n) { raw(p, n); }

  size_t size() const { return buf_.size(); }
  const std::string& data() const { return buf_; }

 private:
  void raw(const void* p, size_t n) {
    // Little-endian host assumed; all supported targets are.
    buf_.append(static_cast<const char*>(p), n);
  }
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t size, std::string what)
      : data_(data), size_(size), what_(std::move(what)) {}

  uint8_t u8() { return read<uint8_t>(); }
  uint16_t u16() { return read<uint16_t>(); }
  uint32_t u32() { return read<uint32_t>(); }
  uint64_t u64() { return read<uint64_t>(); }
  int64_t i64() { return read<int64_t>(); }
  float f32() { return read<float>(); }
  double f64() { return read<double>(); }
  std::string str() {
    const uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  void bytes(void* out, size_t n) {
    need(n);
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }
  void skip(size_t n) {
    need(n);
    pos_ += n;
  }

  size_t pos() const { return pos_; }
  size_t remaining() const { return size_ - pos_; }
  bool at_end() const { return pos_ == size_; }

  [[noreturn]] void fail(const std::string& reason) const {
    throw std::runtime_error(what_ + ": " + reason + " at byte offset " + std::to_string(pos_));
  }

 private:
  template <typename T>
  T read() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void need(size_t n) const {
    if (pos_ + n > size_)
      throw std::runtime_error(what_ + ": truncated, need " + std::to_string(n) +
                               " bytes at offset " + std::to_string(pos_) + " but only " +
                               std::to_string(size_ - pos_) + " remain");
  }

  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  std::string what_;
};

uint32_t crc32(const void* data, size_t n);
uint64_t fnv1a64(const void* data, size_t n);
inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace segforge::detail
