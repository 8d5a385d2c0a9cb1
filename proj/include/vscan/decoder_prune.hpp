#pragma once

// Stage 2: text-aware pruning of merged visual tokens at a middle LLM layer.
//
// Layer accounting: layers 1..k run on all merged tokens; attention at layer
// k scores them, and layers k+1..K run on the retained subset.

#include <cstddef>
#include <vector>

#include "vscan/numerics.hpp"
#include "vscan/trace.hpp"

namespace vscan {

struct PruneConfig {
  std::size_t layer = 16;      // k, 1-based
  double retention = 1.0 / 3;  // R2, in [0, 1]
  std::size_t n_layers = 32;   // K
};

void validate(const PruneConfig& cfg);

struct LayerTokenProfile {
  std::vector<std::size_t> tokens_per_layer;  // n_1 .. n_K
  IndexList retained;                         // ascending, kept after layer k
  std::size_t n_merged = 0;
  std::size_t prune_layer = 0;
};

// Mean over heads of the last-instruction attention restricted to `span`.
// Throws LayoutError if the span leaves the sequence.
Tensor text_attention_scores(const DecoderTrace& dec, std::size_t layer, VisualSpan span);

// Number of tokens kept out of n at retention r.
std::size_t retained_count(std::size_t n, double retention);

LayerTokenProfile prune_at_layer(std::span<const double> scores, const PruneConfig& cfg,
                                 std::size_t n_merged);

struct KvUsage {
  std::vector<std::size_t> tokens_per_layer;  // visual + text entries per layer
  double fraction = 1.0;                      // relative to the unpruned model
};

// KV entries per layer are n_j + n_text_total; the fraction divides their sum
// by K * (n_visual_original + n_text_total).
KvUsage kv_cache_entries(const LayerTokenProfile& profile, std::size_t n_visual_original,
                         std::size_t n_text_total);

}  // namespace vscan
