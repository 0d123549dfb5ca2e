#include "segforge/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "binio.hpp"

namespace segforge {

namespace {

// PNM header tokens are separated by whitespace; '#' starts a comment that
// runs to end of line.
class PnmScanner {
 public:
  PnmScanner(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  char getc() {
    if (pos_ >= bytes_.size()) fail("unexpected end of file");
    return bytes_[pos_++];
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int64_t number() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || bytes_[pos_] < '0' || bytes_[pos_] > '9')
      fail("expected a decimal number");
    int64_t v = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1ll << 31)) fail("number out of range");
      ++pos_;
    }
    return v;
  }

  size_t pos() const { return pos_; }
  const std::string& bytes() const { return bytes_; }

  [[noreturn]] void fail(const std::string& reason) const {
    throw std::runtime_error(path_ + ": PNM parse error, " + reason + " at byte offset " +
                             std::to_string(pos_));
  }

 private:
  const std::string& bytes_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

Tensor read_image_pnm(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  PnmScanner s(bytes, path);

  const char m0 = s.getc();
  const char m1 = s.getc();
  if (m0 != 'P' || (m1 != '5' && m1 != '6'))
    throw std::runtime_error(path + ": PNM parse error, bad magic (want P5 or P6) at byte offset 0");
  const int64_t channels = (m1 == '5') ? 1 : 3;

  const int64_t w = s.number();
  const int64_t h = s.number();
  const int64_t maxval = s.number();
  if (w < 1 || h < 1) s.fail("zero image dimension");
  if (maxval != 255) s.fail("unsupported max value " + std::to_string(maxval) + " (want 255)");
  // Exactly one whitespace byte separates the header from the payload.
  const char sep = s.getc();
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
    s.fail("missing whitespace before pixel data");

  const size_t need = static_cast<size_t>(h * w * channels);
  if (bytes.size() - s.pos() < need)
    s.fail("pixel payload truncated, need " + std::to_string(need) + " bytes, have " +
           std::to_string(bytes.size() - s.pos()));

  Tensor t = Tensor::zeros({h, w, channels});
  const uint8_t* p = reinterpret_cast<const uint8_t*>(bytes.data()) + s.pos();
  for (size_t i = 0; i < need; ++i) t.f32[i] = static_cast<float>(p[i]);
  return t;
}

void write_image_pnm(const Tensor& t, const std::string& path) {
  if (t.rank() != 3 || (t.shape[2] != 1 && t.shape[2] != 3))
    throw std::invalid_argument("write_image_pnm: need [H,W,1] or [H,W,3], got " +
                                shape_to_string(t.shape));
  if (t.dtype != DType::Float32)
    throw std::invalid_argument("write_image_pnm: only float32 tensors are written");
  const int64_t h = t.shape[0], w = t.shape[1], c = t.shape[2];

  char header[64];
  const int header_len =
      std::snprintf(header, sizeof(header), "P%c\n%lld %lld\n255\n", c == 1 ? '5' : '6',
                    static_cast<long long>(w), static_cast<long long>(h));

  std::string out;
  out.reserve(static_cast<size_t>(header_len) + t.f32.size());
  out.append(header, static_cast<size_t>(header_len));
  for (float v : t.f32) {
    const long q = std::lroundf(v);
    out.push_back(static_cast<char>(q < 0 ? 0 : (q > 255 ? 255 : q)));
  }
  detail::write_file(path, out);
}

}  // namespace segforge
