#pragma once

// Seeded synthetic traces standing in for a real vision-language model.
//
// Both generators are pure functions of their parameters: every (layer, head)
// block draws from its own Xorshift64Star stream keyed by (seed, kind, layer,
// head), so output is identical regardless of thread count.

#include <cstddef>
#include <cstdint>

#include "vscan/trace.hpp"

namespace vscan {

struct EncoderGenParams {
  std::uint64_t seed = 0;
  std::size_t grid_h = 6;
  std::size_t grid_w = 6;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t embed_dim = 16;
  // Weight of the distance-decay term in self-attention logits at layer 1;
  // falls linearly to 0 at the last layer.
  double locality_strength = 0.0;
  bool with_cls = true;
  bool with_self = true;
};

// Self-attention logits: U(-2, 2) noise minus w_l * chebyshev(i, j).
// [CLS] logits: U(-2, 2) noise plus 1.5 * saliency[j], where saliency is a
// per-token U(0, 1) field shared by all layers and heads.
// Embeddings: U(-1, 1) entries, each row scaled to unit norm.
EncoderTrace generate_synthetic_encoder(const EncoderGenParams& params);

struct DecoderGenParams {
  std::uint64_t seed = 0;
  std::size_t layers = 8;
  std::size_t heads = 4;
  std::size_t n_pre_text = 4;
  std::size_t n_visual = 36;
  std::size_t n_post_text = 8;
  // Visual grid; grid_cols == 0 means a single row of n_visual tokens.
  std::size_t grid_rows = 1;
  std::size_t grid_cols = 0;
  // Recency bonus at layer 1 for the final position; scales with p / (seq_len - 1)
  // and decays linearly to 0 by layer K/2.
  double position_bias_strength = 0.0;
  // Logit bonus on visual positions for layers in [boost_first, boost_last].
  // boost_first == 0 selects the middle third of the decoder.
  double visual_boost = 0.0;
  std::size_t boost_first = 0;
  std::size_t boost_last = 0;
};

// Logits per layer/head: U(-2, 2) noise + recency bonus + optional visual
// boost, then softmax over the full sequence.
DecoderTrace generate_synthetic_decoder(const DecoderGenParams& params);

// Resolved [first, last] band (1-based) used by the visual boost.
std::pair<std::size_t, std::size_t> boost_band(const DecoderGenParams& params);

}  // namespace vscan
