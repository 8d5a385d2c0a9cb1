#pragma once

// A trace bundle is a directory holding `manifest.json` plus one TensorFile
// per array. Tensors are written first and the manifest last; a bundle is
// complete once its manifest exists.
//
// Encoder manifest keys: version, kind="encoder", grid_h, grid_w, n_layers,
// n_heads, embed_dim, embeddings (file name), layers[] of
// {layer, cls, self} where cls/self are file names or null.
//
// Decoder manifest keys: version, kind="decoder", n_layers, n_heads,
// n_pre_text, n_visual, n_post_text, grid_rows, grid_cols, layers[] of
// {layer, last_instr}.

#include <filesystem>
#include <string>

#include "vscan/tensor_file.hpp"
#include "vscan/trace.hpp"

namespace vscan {

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

enum class TraceKind { kEncoder, kDecoder };

// Writes the bundle into `dir` (created if needed); returns the manifest path.
std::filesystem::path write_bundle(const std::filesystem::path& dir, const EncoderTrace& trace,
                                   DType dtype = DType::kF32);
std::filesystem::path write_bundle(const std::filesystem::path& dir, const DecoderTrace& trace,
                                   DType dtype = DType::kF32);

// `path` may be the bundle directory or its manifest. Loaded traces are
// validated; row sums off by more than kRowSumTolerance throw TraceError.
TraceKind bundle_kind(const std::filesystem::path& path);
EncoderTrace read_encoder_bundle(const std::filesystem::path& path);
DecoderTrace read_decoder_bundle(const std::filesystem::path& path);

}  // namespace vscan
