#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "support/oracles.hpp"
#include "vscan/bundle.hpp"
#include "vscan/error.hpp"
#include "vscan/synthetic.hpp"
#include "vscan/tensor_file.hpp"

using namespace vscan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("vscan_trace_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::uint64_t format_offset(const std::vector<std::byte>& bytes) {
  try {
    decode_tensor(bytes);
  } catch (const FormatError& e) {
    return e.offset();
  }
  FAIL("expected a FormatError");
  return 0;
}

}  // namespace

TEST_CASE("TensorFile header layout is bit-exact") {
  const auto bytes = encode_tensor(Tensor({2, 2}, {1, 2, 3, 4}), DType::kF64);
  REQUIRE(bytes.size() == 8 + 2 * 8 + 4 * 8);
  CHECK(bytes[0] == std::byte{'V'});
  CHECK(bytes[3] == std::byte{'N'});
  CHECK(bytes[4] == std::byte{1});  // version, little-endian
  CHECK(bytes[5] == std::byte{0});
  CHECK(bytes[6] == std::byte{1});  // f64
  CHECK(bytes[7] == std::byte{2});  // ndim
  CHECK(bytes[8] == std::byte{2});  // dims[0] low byte
  // 1.0 as little-endian IEEE-754 double: 00 00 00 00 00 00 F0 3F
  CHECK(bytes[24 + 6] == std::byte{0xF0});
  CHECK(bytes[24 + 7] == std::byte{0x3F});

  const auto f32 = encode_tensor(Tensor::vector({1.0}), DType::kF32);
  REQUIRE(f32.size() == 8 + 8 + 4);
  CHECK(f32[6] == std::byte{0});
  CHECK(f32[19] == std::byte{0x3F});
  CHECK(f32[18] == std::byte{0x80});
}

TEST_CASE("TensorFile round trip") {
  const auto dir = scratch("roundtrip");
  const Tensor t({2, 2}, {1, 2, 3, 4});
  write_tensor(dir / "t.vscn", t);
  CHECK(read_tensor(dir / "t.vscn") == t);

  Xorshift64Star rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    Shape shape(1 + rng() % 4);
    for (auto& d : shape) d = 1 + rng() % 5;
    std::vector<double> values(shape_product(shape));
    for (auto& v : values) v = rng.uniform(-1e6, 1e6) * std::pow(10.0, rng.uniform(-200, 200));
    const Tensor x(shape, values);
    CHECK(decode_tensor(encode_tensor(x, DType::kF64)) == x);

    const auto y = decode_tensor(encode_tensor(Tensor(shape, std::vector<double>(values.size(), 0.1)),
                                               DType::kF32));
    for (auto v : y.data()) CHECK(v == static_cast<double>(0.1f));
  }
}

TEST_CASE("TensorFile rejects malformed input with byte offsets") {
  const auto good = encode_tensor(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), DType::kF64);

  auto bad_magic = good;
  for (int i = 0; i < 4; ++i) bad_magic[i] = std::byte{'X'};
  CHECK(format_offset(bad_magic) == 0);

  auto bad_version = good;
  bad_version[4] = std::byte{9};
  CHECK(format_offset(bad_version) == 4);

  auto bad_dtype = good;
  bad_dtype[6] = std::byte{7};
  CHECK(format_offset(bad_dtype) == 6);

  auto zero_dim = good;
  for (int i = 16; i < 24; ++i) zero_dim[i] = std::byte{0};
  CHECK(format_offset(zero_dim) == 16);

  auto huge = good;
  for (int i = 8; i < 24; ++i) huge[i] = std::byte{0xFF};
  CHECK(format_offset(huge) == 8);

  auto huge_second = good;
  for (int i = 16; i < 24; ++i) huge_second[i] = std::byte{0xFF};
  CHECK(format_offset(huge_second) == 16);

  const std::vector<std::byte> truncated(good.begin(), good.end() - 5);
  CHECK(format_offset(truncated) == truncated.size());

  auto trailing = good;
  trailing.push_back(std::byte{0});
  CHECK(format_offset(trailing) == good.size());

  auto nan_payload = good;
  for (int i = 24; i < 32; ++i) nan_payload[i] = std::byte{0xFF};
  CHECK(format_offset(nan_payload) == 24);

  CHECK(format_offset({}) == 0);

  const std::vector<std::size_t> empty_dim{2, 0};
  CHECK_THROWS_AS(encode_tensor(empty_dim, {}, DType::kF64), ShapeError);
  CHECK_THROWS_AS(encode_tensor(Tensor::vector({1e300}), DType::kF32), ShapeError);

  const auto dir = scratch("bad");
  write_file_bytes(dir / "bad.vscn", bad_magic);
  CHECK_THROWS_AS(read_tensor(dir / "bad.vscn"), FormatError);
  CHECK_THROWS_AS(read_tensor(dir / "missing.vscn"), IoError);
}

TEST_CASE("encoder generator: determinism and normalisation") {
  EncoderGenParams p{.seed = 7, .grid_h = 4, .grid_w = 5, .layers = 3, .heads = 2,
                     .embed_dim = 6, .locality_strength = 2.0};
  const auto a = generate_synthetic_encoder(p);
  const auto b = generate_synthetic_encoder(p);
  for (std::size_t l = 1; l <= 3; ++l) {
    CHECK(encode_tensor(a.cls(l)) == encode_tensor(b.cls(l)));
    CHECK(encode_tensor(a.self(l)) == encode_tensor(b.self(l)));
  }
  CHECK(a.embeddings == b.embeddings);
  CHECK_NOTHROW(validate(a));
  for (std::size_t i = 0; i < a.n_tokens(); ++i) {
    double norm2 = 0;
    for (auto v : a.embeddings.row(i)) norm2 += v * v;
    CHECK(std::abs(norm2 - 1.0) < 1e-12);
  }

  p.seed = 8;
  CHECK_FALSE(generate_synthetic_encoder(p).embeddings == a.embeddings);

  p.grid_h = 0;
  CHECK_THROWS_AS(generate_synthetic_encoder(p), ConfigError);
}

TEST_CASE("encoder generator: locality strength shapes near-mass") {
  using vscan::testing::near_mass;
  EncoderGenParams p{.seed = 1, .grid_h = 6, .grid_w = 6, .layers = 4, .heads = 4,
                     .embed_dim = 8, .locality_strength = 10.0, .with_cls = false};
  const auto local = generate_synthetic_encoder(p);
  CHECK(near_mass(local, 1) > near_mass(local, 4));
  CHECK(near_mass(local, 1) > 0.9);

  // Without the kernel, the first and last layers come from the same
  // distribution: both sit near the uniform share of 9-cell neighbourhoods.
  p.locality_strength = 0.0;
  const auto flat = generate_synthetic_encoder(p);
  double uniform_share = 0.0;
  for (std::size_t i = 0; i < 36; ++i) {
    const auto r = i / 6, c = i % 6;
    const auto rows = 1 + (r > 0) + (r < 5), cols = 1 + (c > 0) + (c < 5);
    uniform_share += static_cast<double>(rows * cols) / 36.0;
  }
  uniform_share /= 36.0;
  CHECK(std::abs(near_mass(flat, 1) - uniform_share) < 0.05);
  CHECK(std::abs(near_mass(flat, 4) - uniform_share) < 0.05);
}

TEST_CASE("decoder generator: determinism, layout and bias") {
  DecoderGenParams p{.seed = 3, .layers = 8, .heads = 4, .n_pre_text = 4, .n_visual = 36,
                     .n_post_text = 8, .grid_rows = 6, .grid_cols = 6,
                     .position_bias_strength = 5.0};
  const auto a = generate_synthetic_decoder(p);
  const auto b = generate_synthetic_decoder(p);
  REQUIRE(a.last_instr_attention.size() == 8);
  for (std::size_t k = 1; k <= 8; ++k) CHECK(a.layer(k) == b.layer(k));
  CHECK_NOTHROW(validate(a));
  CHECK(a.layout.seq_len() == 48);

  p.grid_rows = 5;
  CHECK_THROWS_AS(generate_synthetic_decoder(p), ConfigError);
}

TEST_CASE("bundles round trip and enforce row sums") {
  const auto dir = scratch("bundle");
  const auto enc = generate_synthetic_encoder({.seed = 2, .grid_h = 3, .grid_w = 4, .layers = 2,
                                               .heads = 2, .embed_dim = 5, .locality_strength = 1,
                                               .with_cls = true, .with_self = true});
  const auto manifest = write_bundle(dir / "enc", enc, DType::kF64);
  CHECK(manifest == dir / "enc" / "manifest.json");
  CHECK(bundle_kind(dir / "enc") == TraceKind::kEncoder);
  const auto back = read_encoder_bundle(dir / "enc");
  CHECK(back.cls(2) == enc.cls(2));
  CHECK(back.self(1) == enc.self(1));
  CHECK(back.embeddings == enc.embeddings);

  const auto dec = generate_synthetic_decoder({.seed = 2, .layers = 3, .heads = 2, .n_visual = 6});
  write_bundle(dir / "dec", dec, DType::kF32);
  CHECK(bundle_kind(dir / "dec" / "manifest.json") == TraceKind::kDecoder);
  const auto dback = read_decoder_bundle(dir / "dec");
  CHECK(dback.layout.n_visual == 6);
  CHECK(dback.grid_cols == 6);
  for (std::size_t k = 1; k <= 3; ++k) {
    for (std::size_t i = 0; i < dec.layer(k).size(); ++i) {
      CHECK(dback.layer(k)[i] == static_cast<double>(static_cast<float>(dec.layer(k)[i])));
    }
  }
  CHECK_THROWS_AS(read_encoder_bundle(dir / "dec"), TraceError);

  // Corrupt one attention file: rows no longer sum to 1.
  auto rows = std::vector<double>(dec.layer(2).data().begin(), dec.layer(2).data().end());
  rows[0] += 0.01;
  write_tensor(dir / "dec" / "attn_L02.vscn", Tensor(dec.layer(2).shape(), rows));
  CHECK_THROWS_AS(read_decoder_bundle(dir / "dec"), TraceError);

  std::ofstream(dir / "dec" / "manifest.json") << "{ not json";
  CHECK_THROWS_AS(read_decoder_bundle(dir / "dec"), TraceError);
}

TEST_CASE("row sums hold for generated traces over many seeds") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto enc = generate_synthetic_encoder({.seed = seed, .grid_h = 1 + seed % 5,
                                                 .grid_w = 1 + seed % 3, .layers = 2, .heads = 3,
                                                 .embed_dim = 4,
                                                 .locality_strength = static_cast<double>(seed)});
    CHECK_NOTHROW(validate(enc));
    const auto dec = generate_synthetic_decoder({.seed = seed, .layers = 4, .heads = 2,
                                                 .n_pre_text = seed % 3, .n_visual = 1 + seed,
                                                 .n_post_text = seed % 4,
                                                 .position_bias_strength = 0.5 * seed,
                                                 .visual_boost = 2.0});
    CHECK_NOTHROW(validate(dec));
  }
}
