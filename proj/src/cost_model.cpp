#include "vscan/cost_model.hpp"

#include <array>
#include <numeric>

#include <fmt/format.h>

#include "vscan/error.hpp"

namespace vscan {

namespace {

constexpr std::array kPresets{
    ModelPreset{"llava15", {32, 4096, 11008}, 576, 24, 6, 16, ScoreSource::kCls},
    ModelPreset{"llava-next", {32, 4096, 11008}, 2880, 24, 6, 16, ScoreSource::kCls},
    ModelPreset{"qwen25vl-7b", {28, 3584, 18944}, std::nullopt, 32, 8, 14, ScoreSource::kSelfAvg},
};

double layer_flops(double n, const ModelDims& dims) {
  const double d = static_cast<double>(dims.hidden);
  const double m = static_cast<double>(dims.intermediate);
  return 4.0 * n * d * d + 2.0 * n * n * d + 3.0 * n * d * m;
}

}  // namespace

void validate(const ModelDims& dims) {
  if (dims.n_layers < 1) throw ConfigError("K", "must be >= 1");
  if (dims.hidden < 1) throw ConfigError("d", "must be >= 1");
  if (dims.intermediate < 1) throw ConfigError("m", "must be >= 1");
}

std::span<const ModelPreset> model_presets() { return kPresets; }

const ModelPreset& find_preset(std::string_view name) {
  for (const auto& p : kPresets) {
    if (p.name == name) return p;
  }
  throw ConfigError("preset", fmt::format("unknown preset '{}'", name));
}

double flops_total(std::span<const double> tokens_per_layer, const ModelDims& dims) {
  validate(dims);
  if (tokens_per_layer.size() != dims.n_layers) {
    throw ShapeError(fmt::format("{} layer counts for a {}-layer model", tokens_per_layer.size(),
                                 dims.n_layers));
  }
  double total = 0.0;
  for (auto n : tokens_per_layer) total += layer_flops(n, dims);
  return total;
}

double flops_total(std::span<const std::size_t> tokens_per_layer, const ModelDims& dims) {
  std::vector<double> as_double(tokens_per_layer.begin(), tokens_per_layer.end());
  return flops_total(std::span<const double>(as_double), dims);
}

double flops_uniform(double tokens, const ModelDims& dims) {
  validate(dims);
  return static_cast<double>(dims.n_layers) * layer_flops(tokens, dims);
}

double average_retention(double r1, double r2, std::size_t k, std::size_t K) {
  const double kk = static_cast<double>(k), KK = static_cast<double>(K);
  return r1 * (kk + (KK - kk) * r2) / KK;
}

double solve_r1(double target_avg, double r2, std::size_t k, std::size_t K) {
  if (!(target_avg > 0.0 && target_avg <= 1.0)) {
    throw BudgetError(fmt::format("target average {} outside (0, 1]", target_avg));
  }
  if (K < 1 || k < 1 || k > K) throw ConfigError("k", fmt::format("{} outside [1, {}]", k, K));
  const double kk = static_cast<double>(k), KK = static_cast<double>(K);
  const double denom = (kk + (KK - kk) * r2) / KK;
  if (!(denom > 0.0)) throw BudgetError("decode-stage retention is zero");
  const double r1 = target_avg / denom;
  if (r1 > 1.0 + 1e-12) {
    throw BudgetError(fmt::format("target {} needs R1 = {:.6f} > 1 with R2 = {}, k = {}, K = {}",
                                  target_avg, r1, r2, k, K));
  }
  return std::min(r1, 1.0);
}

CostReport build_report(const TokenSelection& selection, const LayerTokenProfile& profile,
                        const ModelDims& dims, std::size_t n_text_total) {
  validate(dims);
  if (profile.tokens_per_layer.size() != dims.n_layers) {
    throw ConfigError("K", fmt::format("profile covers {} layers, model has {}",
                                       profile.tokens_per_layer.size(), dims.n_layers));
  }
  if (profile.n_merged != selection.selected.size()) {
    throw ShapeError(fmt::format("profile expects {} merged tokens, selection has {}",
                                 profile.n_merged, selection.selected.size()));
  }
  CostReport r;
  r.n_visual_original = selection.n_tokens;
  r.n_text_total = n_text_total;
  r.tokens_per_layer = profile.tokens_per_layer;
  for (auto n : profile.tokens_per_layer) {
    r.flops_per_layer.push_back(layer_flops(static_cast<double>(n), dims));
  }
  r.total_flops = std::accumulate(r.flops_per_layer.begin(), r.flops_per_layer.end(), 0.0);
  r.baseline_flops = flops_uniform(static_cast<double>(selection.n_tokens), dims);
  r.average_tokens = std::accumulate(profile.tokens_per_layer.begin(),
                                     profile.tokens_per_layer.end(), 0.0) /
                     static_cast<double>(dims.n_layers);
  r.total_flops_uniform = flops_uniform(r.average_tokens, dims);
  r.avg_retention_overall = r.average_tokens / static_cast<double>(selection.n_tokens);
  const auto kv = kv_cache_entries(profile, selection.n_tokens, n_text_total);
  r.kv_tokens_per_layer = kv.tokens_per_layer;
  r.kv_fraction = kv.fraction;
  r.prefill_speedup_estimate = r.total_flops > 0.0 ? r.baseline_flops / r.total_flops : 0.0;
  return r;
}

}  // namespace vscan
