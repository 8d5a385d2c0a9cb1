#include "vscan/decoder_prune.hpp"

#include <fmt/format.h>

#include "vscan/error.hpp"
#include "vscan/kernels.hpp"

namespace vscan {

void validate(const PruneConfig& cfg) {
  if (cfg.n_layers < 1) throw ConfigError("K", "must be >= 1");
  if (cfg.layer < 1 || cfg.layer > cfg.n_layers) {
    throw ConfigError("k", fmt::format("prune layer {} outside [1, {}]", cfg.layer, cfg.n_layers));
  }
  if (!(cfg.retention >= 0.0 && cfg.retention <= 1.0)) {
    throw ConfigError("r2", fmt::format("retention {} outside [0, 1]", cfg.retention));
  }
}

Tensor text_attention_scores(const DecoderTrace& dec, std::size_t layer, VisualSpan span) {
  const auto& rows = dec.layer(layer);
  const auto seq = rows.dim(1);
  if (span.count == 0 || span.begin + span.count > seq) {
    throw LayoutError(fmt::format("visual span [{}, {}) outside sequence of length {}", span.begin,
                                  span.begin + span.count, seq));
  }
  std::vector<double> out(span.count);
  kernels::head_mean(rows.data(), rows.dim(0), seq, span.begin, out);
  return Tensor::vector(std::move(out));
}

std::size_t retained_count(std::size_t n, double retention) {
  return std::min(n, round_half_up(retention * static_cast<double>(n)));
}

LayerTokenProfile prune_at_layer(std::span<const double> scores, const PruneConfig& cfg,
                                 std::size_t n_merged) {
  validate(cfg);
  if (scores.size() != n_merged) {
    throw ShapeError(fmt::format("{} scores for {} merged tokens", scores.size(), n_merged));
  }
  const auto keep = retained_count(n_merged, cfg.retention);
  LayerTokenProfile profile;
  profile.n_merged = n_merged;
  profile.prune_layer = cfg.layer;
  profile.retained = top_k_indices(scores, keep);
  profile.tokens_per_layer.resize(cfg.n_layers);
  for (std::size_t j = 1; j <= cfg.n_layers; ++j) {
    profile.tokens_per_layer[j - 1] = j <= cfg.layer ? n_merged : keep;
  }
  return profile;
}

KvUsage kv_cache_entries(const LayerTokenProfile& profile, std::size_t n_visual_original,
                         std::size_t n_text_total) {
  KvUsage usage;
  const auto K = profile.tokens_per_layer.size();
  if (K == 0) throw ShapeError("empty layer profile");
  double total = 0.0;
  for (auto n : profile.tokens_per_layer) {
    usage.tokens_per_layer.push_back(n + n_text_total);
    total += static_cast<double>(n + n_text_total);
  }
  const double baseline = static_cast<double>(K) * static_cast<double>(n_visual_original + n_text_total);
  if (baseline <= 0.0) throw BudgetError("KV baseline is empty");
  usage.fraction = total / baseline;
  return usage;
}

}  // namespace vscan
