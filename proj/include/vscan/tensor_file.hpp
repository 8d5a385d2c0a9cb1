#pragma once

// TensorFile binary layout (all integers and values little-endian):
//
//   offset 0   magic    4 bytes, "VSCN"
//   offset 4   version  u16, currently 1
//   offset 6   dtype    u8, 0 = f32, 1 = f64
//   offset 7   ndim     u8, >= 1
//   offset 8   dims     ndim x u64, each >= 1
//   then       payload  product(dims) values, row-major
//
// Decoding failures throw FormatError carrying the byte offset at which the
// problem was detected.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vscan/numerics.hpp"

namespace vscan {

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

inline constexpr std::uint16_t kTensorFileVersion = 1;

std::vector<std::byte> encode_tensor(std::span<const std::size_t> shape,
                                     std::span<const double> values, DType dtype);
std::vector<std::byte> encode_tensor(const Tensor& t, DType dtype = DType::kF64);

Tensor decode_tensor(std::span<const std::byte> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype = DType::kF64);
Tensor read_tensor(const std::filesystem::path& path);

// Whole-file helpers shared by the bundle and report writers.
std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace vscan
