#pragma once

// Attention measurements over decoder traces: where last-instruction
// attention puts its top tokens on the image grid, and how much attention
// the visual span receives per layer.

#include <cstddef>
#include <vector>

#include "vscan/numerics.hpp"
#include "vscan/trace.hpp"

namespace vscan {

struct BiasHistogram {
  std::size_t layer = 0;
  double retention = 0.0;
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  std::vector<std::size_t> counts;  // [grid_rows x grid_cols], row-major
  IndexList retained;

  std::size_t total() const;
  std::vector<std::size_t> row_totals() const;
};

// Keeps the top round_half_up(retention * n_visual) visual tokens by
// head-averaged last-instruction attention at `layer` (the same selection
// prune_at_layer makes) and bins them by grid cell.
BiasHistogram position_bias_histogram(const DecoderTrace& dec, std::size_t layer, double retention);

struct AttentionSumCurve {
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::vector<double> sums;       // [layers x heads], row-major
  std::vector<double> head_mean;  // per layer

  double at(std::size_t layer, std::size_t head) const { return sums[(layer - 1) * n_heads + head]; }
};

// Per layer and head, the attention mass the last instruction token puts on
// the visual span.
AttentionSumCurve attention_sum_per_layer(const DecoderTrace& dec);

}  // namespace vscan
