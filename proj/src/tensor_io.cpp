#include "xlg/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "xlg/error.hpp"

namespace xlg {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void check_shape(std::uint8_t rank, const std::array<std::uint32_t, 3>& dims) {
  if (rank < 1 || rank > 3) throw InvalidArgument("tensor rank must be 1..3");
  for (std::size_t i = 0; i < 3; ++i) {
    if (dims[i] < 1) throw InvalidArgument("tensor dims must be >= 1");
    if (i >= rank && dims[i] != 1) throw InvalidArgument("unused tensor dims must be 1");
  }
}

}  // namespace

Tensor Tensor::vector(std::vector<float> values) {
  Tensor t;
  t.rank = 1;
  t.dims = {static_cast<std::uint32_t>(values.size()), 1, 1};
  t.data = std::move(values);
  return t;
}

Tensor Tensor::matrix(std::uint32_t rows, std::uint32_t cols, std::vector<float> values) {
  Tensor t;
  t.rank = 2;
  t.dims = {rows, cols, 1};
  t.data = std::move(values);
  if (t.data.size() != t.element_count()) throw InvalidArgument("tensor: value count mismatch");
  return t;
}

Tensor Tensor::cube(std::uint32_t d0, std::uint32_t d1, std::uint32_t d2, std::vector<float> values) {
  Tensor t;
  t.rank = 3;
  t.dims = {d0, d1, d2};
  t.data = std::move(values);
  if (t.data.size() != t.element_count()) throw InvalidArgument("tensor: value count mismatch");
  return t;
}

std::size_t Tensor::element_count() const {
  return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
  check_shape(tensor.rank, tensor.dims);
  if (tensor.data.size() != tensor.element_count()) {
    throw InvalidArgument("tensor: payload size does not match dims");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kTensorHeaderBytes + 4 * tensor.data.size());
  out.insert(out.end(), kTensorMagic.begin(), kTensorMagic.end());
  out.push_back(tensor.rank);
  for (auto d : tensor.dims) put_u32(out, d);
  for (float v : tensor.data) {
    if (!std::isfinite(v)) throw InvalidArgument("tensor: non-finite entry");
    put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kTensorHeaderBytes) throw FormatError("tensor: truncated header");
  if (std::memcmp(bytes.data(), kTensorMagic.data(), kTensorMagic.size()) != 0) {
    throw FormatError("tensor: bad magic");
  }
  Tensor t;
  t.rank = bytes[8];
  for (std::size_t i = 0; i < 3; ++i) t.dims[i] = get_u32(bytes.data() + 9 + 4 * i);
  try {
    check_shape(t.rank, t.dims);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  // Guard the element count before multiplying into a byte count.
  const std::uint64_t count = static_cast<std::uint64_t>(t.dims[0]) * t.dims[1] * t.dims[2];
  if (count > (std::numeric_limits<std::uint64_t>::max() - kTensorHeaderBytes) / 4 ||
      count > std::numeric_limits<std::size_t>::max() / 4) {
    throw FormatError("tensor: dimension overflow");
  }
  const std::uint64_t payload = bytes.size() - kTensorHeaderBytes;
  if (payload < count * 4) throw FormatError("tensor: truncated payload");
  if (payload > count * 4) throw FormatError("tensor: trailing bytes after payload");
  t.data.resize(static_cast<std::size_t>(count));
  const std::uint8_t* p = bytes.data() + kTensorHeaderBytes;
  for (std::size_t i = 0; i < t.data.size(); ++i, p += 4) {
    t.data[i] = std::bit_cast<float>(get_u32(p));
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  const auto bytes = encode_tensor(tensor);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace xlg
