#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace xlg {

/// Magic prefix of every tensor file.
inline constexpr std::string_view kTensorMagic = "GLNSTNS1";
/// magic (8) + rank (1) + three u32 dims (12).
inline constexpr std::size_t kTensorHeaderBytes = 21;

/// A rank-1..3 float32 tensor stored row-major. Unused trailing dims are 1.
struct Tensor {
  std::uint8_t rank = 1;
  std::array<std::uint32_t, 3> dims{1, 1, 1};
  std::vector<float> data;

  static Tensor vector(std::vector<float> values);
  static Tensor matrix(std::uint32_t rows, std::uint32_t cols, std::vector<float> values);
  static Tensor cube(std::uint32_t d0, std::uint32_t d1, std::uint32_t d2, std::vector<float> values);

  std::size_t element_count() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Serializes to the fixed little-endian layout. Throws InvalidArgument for
/// bad dims or non-finite entries, IoError when the file cannot be written.
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);

/// Exact inverse of write_tensor. Throws FormatError on bad magic, bad rank,
/// dimension overflow or a payload that does not match the header.
Tensor read_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

}  // namespace xlg
