#include "vscan/analysis.hpp"

#include <cstdint>
#include <numeric>

#include <fmt/format.h>

#include "vscan/decoder_prune.hpp"
#include "vscan/error.hpp"

namespace vscan {

std::size_t BiasHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::vector<std::size_t> BiasHistogram::row_totals() const {
  std::vector<std::size_t> rows(grid_rows, 0);
  for (std::size_t r = 0; r < grid_rows; ++r) {
    for (std::size_t c = 0; c < grid_cols; ++c) rows[r] += counts[r * grid_cols + c];
  }
  return rows;
}

BiasHistogram position_bias_histogram(const DecoderTrace& dec, std::size_t layer, double retention) {
  if (!(retention > 0.0 && retention <= 1.0)) {
    throw ConfigError("retention", fmt::format("{} outside (0, 1]", retention));
  }
  if (dec.grid_rows * dec.grid_cols != dec.layout.n_visual) {
    throw LayoutError(fmt::format("visual grid {}x{} does not hold {} tokens", dec.grid_rows,
                                  dec.grid_cols, dec.layout.n_visual));
  }
  const auto scores = text_attention_scores(dec, layer, dec.visual_span());
  const auto n = dec.layout.n_visual;
  // Same selection path as decoder pruning at this layer.
  const auto profile = prune_at_layer(scores.data(), {layer, retention, dec.n_layers}, n);

  BiasHistogram hist{layer, retention, dec.grid_rows, dec.grid_cols,
                     std::vector<std::size_t>(n, 0), profile.retained};
  for (auto i : hist.retained) ++hist.counts[i];
  return hist;
}

AttentionSumCurve attention_sum_per_layer(const DecoderTrace& dec) {
  const auto span = dec.visual_span();
  const auto seq = dec.layout.seq_len();
  if (span.count == 0 || span.begin + span.count > seq) throw LayoutError("visual span outside sequence");
  AttentionSumCurve curve;
  curve.n_layers = dec.n_layers;
  curve.n_heads = dec.n_heads;
  curve.sums.assign(dec.n_layers * dec.n_heads, 0.0);
  curve.head_mean.assign(dec.n_layers, 0.0);

  const auto layers = static_cast<std::int64_t>(dec.n_layers);
#pragma omp parallel for schedule(static)
  for (std::int64_t kk = 0; kk < layers; ++kk) {
    const auto k = static_cast<std::size_t>(kk);
    const auto& rows = dec.last_instr_attention[k];
    double layer_total = 0.0;
    for (std::size_t h = 0; h < dec.n_heads; ++h) {
      double s = 0.0;
      for (std::size_t p = span.begin; p < span.begin + span.count; ++p) s += rows[h * seq + p];
      curve.sums[k * dec.n_heads + h] = s;
      layer_total += s;
    }
    curve.head_mean[k] = layer_total / static_cast<double>(dec.n_heads);
  }
  return curve;
}

}  // namespace vscan
