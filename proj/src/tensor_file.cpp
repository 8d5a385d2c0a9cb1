#include "vscan/tensor_file.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "vscan/error.hpp"

namespace vscan {

namespace {

constexpr std::size_t kHeaderFixed = 8;
constexpr char kMagic[4] = {'V', 'S', 'C', 'N'};

template <typename U>
void put_le(std::vector<std::byte>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<std::byte>((value >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(std::span<const std::byte> bytes, std::size_t offset) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(std::to_integer<std::uint8_t>(bytes[offset + i])) << (8 * i);
  }
  return value;
}

std::size_t elem_size(DType dtype) { return dtype == DType::kF32 ? 4 : 8; }

}  // namespace

std::vector<std::byte> encode_tensor(std::span<const std::size_t> shape,
                                     std::span<const double> values, DType dtype) {
  if (shape.empty() || shape.size() > 255) {
    throw ShapeError(fmt::format("TensorFile rank must be in [1, 255], got {}", shape.size()));
  }
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0) throw ShapeError(fmt::format("TensorFile dimension {} is zero", i));
  }
  if (shape_product(shape) != values.size()) {
    throw ShapeError(fmt::format("TensorFile shape needs {} values, got {}", shape_product(shape),
                                 values.size()));
  }
  std::vector<std::byte> out;
  out.reserve(kHeaderFixed + 8 * shape.size() + elem_size(dtype) * values.size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_le<std::uint16_t>(out, kTensorFileVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
  for (auto d : shape) put_le<std::uint64_t>(out, d);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (dtype == DType::kF64) {
      put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    } else {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(f)) {
        throw ShapeError(fmt::format("value {} at index {} is not representable as f32", v, i));
      }
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

std::vector<std::byte> encode_tensor(const Tensor& t, DType dtype) {
  return encode_tensor(t.shape(), t.data(), dtype);
}

Tensor decode_tensor(std::span<const std::byte> bytes) {
  if (bytes.size() < 4) throw FormatError(bytes.size(), "truncated magic");
  for (std::size_t i = 0; i < 4; ++i) {
    if (bytes[i] != static_cast<std::byte>(kMagic[i])) throw FormatError(0, "bad magic, expected VSCN");
  }
  if (bytes.size() < kHeaderFixed) throw FormatError(bytes.size(), "truncated header");
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kTensorFileVersion) {
    throw FormatError(4, fmt::format("unsupported version {}", version));
  }
  const auto dtype_code = get_le<std::uint8_t>(bytes, 6);
  if (dtype_code > 1) throw FormatError(6, fmt::format("unknown dtype code {}", dtype_code));
  const auto dtype = static_cast<DType>(dtype_code);
  const std::size_t ndim = get_le<std::uint8_t>(bytes, 7);
  if (ndim == 0) throw FormatError(7, "ndim must be >= 1");

  Shape shape(ndim);
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    const std::size_t off = kHeaderFixed + 8 * i;
    if (bytes.size() < off + 8) throw FormatError(bytes.size(), "truncated dims");
    const auto d = get_le<std::uint64_t>(bytes, off);
    if (d == 0) throw FormatError(off, fmt::format("dimension {} is zero", i));
    if (count > std::numeric_limits<std::uint64_t>::max() / d ||
        count * d > std::numeric_limits<std::size_t>::max() / 8) {
      throw FormatError(off, "dims overflow");
    }
    count *= d;
    shape[i] = static_cast<std::size_t>(d);
  }

  const std::size_t payload_at = kHeaderFixed + 8 * ndim;
  const std::size_t esize = elem_size(dtype);
  const std::size_t expected = payload_at + esize * count;
  if (bytes.size() < expected) {
    throw FormatError(bytes.size(),
                      fmt::format("truncated payload, expected {} bytes total", expected));
  }
  if (bytes.size() > expected) throw FormatError(expected, "trailing bytes after payload");

  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t off = payload_at + esize * i;
    const double v = dtype == DType::kF64
                         ? std::bit_cast<double>(get_le<std::uint64_t>(bytes, off))
                         : static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, off)));
    if (!std::isfinite(v)) throw FormatError(off, "non-finite value");
    values[i] = v;
  }
  return Tensor(std::move(shape), std::move(values));
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {} for reading", path.string()));
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError(fmt::format("short read on {}", path.string()));
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write failed on {}", path.string()));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype) {
  write_file_bytes(path, encode_tensor(t, dtype));
}

Tensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError(e.offset(), fmt::format("{} in {}", e.detail(), path.string()));
  }
}

}  // namespace vscan
