#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "xlg/error.hpp"
#include "xlg/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace xlg;

namespace {

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "xlg_tensor_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("single zero element encodes to header plus four zero bytes") {
  const auto p = temp_file("zero.tns");
  write_tensor(p, Tensor::cube(1, 1, 1, {0.0f}));
  const auto bytes = file_bytes(p);
  REQUIRE(bytes.size() == 25);
  CHECK(std::memcmp(bytes.data(), "GLNSTNS1", 8) == 0);
  CHECK(bytes[8] == 3);
  for (std::size_t i = 9; i < 21; i += 4) {
    CHECK(bytes[i] == 1);
    CHECK(bytes[i + 1] == 0);
  }
  CHECK(bytes[21] == 0);
  CHECK(bytes[22] == 0);
  CHECK(bytes[23] == 0);
  CHECK(bytes[24] == 0);
}

TEST_CASE("rank-2 payload is row-major little-endian") {
  const auto bytes = encode_tensor(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  REQUIRE(bytes.size() == kTensorHeaderBytes + 16);
  CHECK(bytes[8] == 2);
  // dims 2, 2, 1
  CHECK(bytes[9] == 2);
  CHECK(bytes[13] == 2);
  CHECK(bytes[17] == 1);
  const float expect[] = {1, 2, 3, 4};
  for (int i = 0; i < 4; ++i) {
    float v;
    const std::uint8_t* p = bytes.data() + kTensorHeaderBytes + 4 * i;
    const std::uint32_t bits = p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24);
    std::memcpy(&v, &bits, 4);
    CHECK(v == expect[i]);
  }
}

TEST_CASE("round trip of a pseudorandom 7x7x512 tensor is bit exact") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<std::uint32_t> bits;
  std::vector<float> data(7 * 7 * 512);
  for (auto& v : data) {
    // random finite bit patterns, including subnormals and signed zero
    std::uint32_t b;
    do {
      b = bits(rng);
    } while ((b & 0x7F800000u) == 0x7F800000u);
    std::memcpy(&v, &b, 4);
  }
  const Tensor t = Tensor::cube(7, 7, 512, data);
  const auto p = temp_file("random.tns");
  write_tensor(p, t);
  const Tensor back = read_tensor(p);
  REQUIRE(back.rank == 3);
  REQUIRE(back.dims == t.dims);
  CHECK(std::memcmp(back.data.data(), t.data.data(), 4 * t.data.size()) == 0);
  // and the reverse direction: re-encoding the decoded tensor yields the same file
  CHECK(encode_tensor(back) == file_bytes(p));
}

TEST_CASE("bad magic is a format error") {
  auto bytes = encode_tensor(Tensor::vector({1.0f}));
  std::memcpy(bytes.data(), "XXXXXXXX", 8);
  CHECK_THROWS_AS(decode_tensor(bytes), FormatError);
}

TEST_CASE("declared 2x2 with three floats is a truncation error") {
  auto bytes = encode_tensor(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  bytes.resize(bytes.size() - 4);
  CHECK_THROWS_WITH_AS(decode_tensor(bytes), doctest::Contains("truncated"), FormatError);
  CHECK_THROWS_AS(decode_tensor(std::vector<std::uint8_t>(10, 0)), FormatError);
}

TEST_CASE("dimension overflow and malformed shapes are rejected") {
  auto bytes = encode_tensor(Tensor::cube(1, 1, 1, {1}));
  for (int i = 9; i < 21; ++i) bytes[i] = 0xFF;
  CHECK_THROWS_AS(decode_tensor(bytes), FormatError);

  auto bad_rank = encode_tensor(Tensor::vector({1}));
  bad_rank[8] = 4;
  CHECK_THROWS_AS(decode_tensor(bad_rank), FormatError);

  auto unused_dim = encode_tensor(Tensor::matrix(1, 1, {1}));
  unused_dim[17] = 2;  // third dim of a rank-2 tensor must be 1
  CHECK_THROWS_AS(decode_tensor(unused_dim), FormatError);
}

TEST_CASE("non-finite entries are refused on write") {
  CHECK_THROWS_AS(encode_tensor(Tensor::vector({std::numeric_limits<float>::quiet_NaN()})),
                  InvalidArgument);
  CHECK_THROWS_AS(encode_tensor(Tensor::vector({std::numeric_limits<float>::infinity()})),
                  InvalidArgument);
}

TEST_CASE("missing file is an I/O error") {
  CHECK_THROWS_AS(read_tensor(temp_file("does_not_exist.tns")), IoError);
}
