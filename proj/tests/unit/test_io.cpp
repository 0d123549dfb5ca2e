#include <doctest.h>

#include <fstream>

#include "segforge/image_io.hpp"
#include "segforge/tensor_io.hpp"
#include "test_helpers.hpp"

using namespace segforge;

TEST_SUITE_BEGIN("io");

namespace {
void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}
std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}
}  // namespace

TEST_CASE("P5 2x2 maps bytes directly to a [2,2,1] tensor") {
  const auto path = testutil::scratch_file("gray.pnm");
  write_bytes(path, std::string("P5\n2 2\n255\n") + std::string("\x00\x01\x02\x03", 4));
  const Tensor t = read_image_pnm(path);
  CHECK(t.shape == std::vector<int64_t>{2, 2, 1});
  CHECK(t.f32 == std::vector<float>{0, 1, 2, 3});
}

TEST_CASE("P6 1x1 red pixel becomes [1,1,3]") {
  const auto path = testutil::scratch_file("red.pnm");
  write_bytes(path, std::string("P6\n1 1\n255\n") + std::string("\xff\x00\x00", 3));
  const Tensor t = read_image_pnm(path);
  CHECK(t.shape == std::vector<int64_t>{1, 1, 3});
  CHECK(t.f32 == std::vector<float>{255, 0, 0});
}

TEST_CASE("PNM write-then-read round-trips generated files byte for byte") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 8; ++i) {
    const int64_t h = 1 + static_cast<int64_t>(rng() % 17);
    const int64_t w = 1 + static_cast<int64_t>(rng() % 17);
    const int64_t c = (rng() % 2) ? 3 : 1;
    Tensor t = Tensor::zeros({h, w, c});
    for (float& v : t.f32) v = static_cast<float>(rng() % 256);

    const auto path = testutil::scratch_file("rt" + std::to_string(i) + ".pnm");
    write_image_pnm(t, path);
    const std::string first = slurp(path);
    const Tensor back = read_image_pnm(path);
    CHECK(back.same_bits(t));
    write_image_pnm(back, path);
    CHECK(slurp(path) == first);
  }
}

TEST_CASE("PNM parser reports byte offsets on malformed input") {
  const auto path = testutil::scratch_file("bad.pnm");
  write_bytes(path, "P7\n2 2\n255\n....");
  CHECK_THROWS_WITH_AS(read_image_pnm(path), doctest::Contains("byte offset"),
                       std::runtime_error);
  write_bytes(path, "P5\n2 2\n65535\n....");
  CHECK_THROWS_WITH_AS(read_image_pnm(path), doctest::Contains("max value"), std::runtime_error);
  write_bytes(path, std::string("P5\n2 2\n255\n") + "\x01\x02");  // truncated payload
  CHECK_THROWS_WITH_AS(read_image_pnm(path), doctest::Contains("truncated"), std::runtime_error);
}

TEST_CASE("PNM header comments are skipped") {
  const auto path = testutil::scratch_file("comment.pnm");
  write_bytes(path, std::string("P5\n# a comment\n2 1\n255\n") + std::string("\x09\x0a", 2));
  const Tensor t = read_image_pnm(path);
  CHECK(t.shape == std::vector<int64_t>{1, 2, 1});
}

TEST_CASE("scalar tensor with empty shape round-trips") {
  Tensor t;
  t.shape = {};
  t.f32 = {1.0f};
  const auto path = testutil::scratch_file("scalar.sgt");
  write_tensor(t, path);
  const Tensor back = read_tensor(path);
  CHECK(back.same_bits(t));
  CHECK(back.elem_count() == 1);
}

TEST_CASE("random float tensor round-trips bitwise") {
  std::mt19937_64 rng(5);
  const Tensor t = testutil::random_tensor({8, 16, 35}, rng, -100.0f, 100.0f);
  const auto path = testutil::scratch_file("rand.sgt");
  write_tensor(t, path);
  CHECK(read_tensor(path).same_bits(t));
}

TEST_CASE("quant8 tensor round-trips including quant params") {
  Tensor t;
  t.shape = {2, 3, 1};
  t.dtype = DType::Quant8;
  t.quant = {0.125f, -4.0f};
  t.q8 = {0, 10, 20, 128, 254, 255};
  const auto path = testutil::scratch_file("quant.sgt");
  write_tensor(t, path);
  const Tensor back = read_tensor(path);
  CHECK(back.same_bits(t));
  CHECK(back.quant == t.quant);
}

TEST_CASE("tensor file errors are distinct and carry offsets") {
  const auto path = testutil::scratch_file("bad.sgt");
  write_bytes(path, "NOPE....");
  CHECK_THROWS_WITH_AS(read_tensor(path), doctest::Contains("magic"), std::runtime_error);

  Tensor t = Tensor::zeros({4, 4, 2});
  const std::string good_path = testutil::scratch_file("good.sgt");
  write_tensor(t, good_path);
  std::string bytes = slurp(good_path);
  bytes.resize(bytes.size() - 7);
  write_bytes(path, bytes);
  CHECK_THROWS_WITH_AS(read_tensor(path), doctest::Contains("truncated"), std::runtime_error);
}

TEST_SUITE_END();
