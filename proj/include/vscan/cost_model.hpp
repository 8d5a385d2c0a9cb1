#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vscan/decoder_prune.hpp"
#include "vscan/encoder_scan.hpp"

namespace vscan {

struct ModelDims {
  std::size_t n_layers = 32;       // K
  std::size_t hidden = 4096;       // d
  std::size_t intermediate = 11008;  // m
};

void validate(const ModelDims& dims);

// Dimensions and default scan/prune layers of a known model.
struct ModelPreset {
  std::string_view name;
  ModelDims dims;
  std::optional<std::size_t> n_visual;  // tokens per image when fixed
  std::size_t encoder_layers;
  std::size_t local_layer;
  std::size_t prune_layer;
  ScoreSource score_source;
};

std::span<const ModelPreset> model_presets();
// Throws ConfigError("preset") for an unknown name.
const ModelPreset& find_preset(std::string_view name);

// Prefill FLOPs over visual tokens: sum_k 4 n_k d^2 + 2 n_k^2 d + 3 n_k d m.
double flops_total(std::span<const std::size_t> tokens_per_layer, const ModelDims& dims);
double flops_total(std::span<const double> tokens_per_layer, const ModelDims& dims);
// Same with n_k equal to `tokens` in every layer.
double flops_uniform(double tokens, const ModelDims& dims);

// Layer-weighted average share of visual tokens kept:
// R1 * (k + (K - k) * R2) / K.
double average_retention(double r1, double r2, std::size_t k, std::size_t K);

// Inverse of average_retention in R1. Throws BudgetError if the target
// needs R1 > 1 or is outside (0, 1].
double solve_r1(double target_avg, double r2, std::size_t k, std::size_t K);

struct CostReport {
  std::size_t n_visual_original = 0;
  std::size_t n_text_total = 0;
  std::vector<std::size_t> tokens_per_layer;
  std::vector<std::size_t> kv_tokens_per_layer;
  std::vector<double> flops_per_layer;
  double baseline_flops = 0.0;      // n_k = n_visual_original in every layer
  double total_flops = 0.0;         // stepped profile
  double average_tokens = 0.0;      // mean of tokens_per_layer
  double total_flops_uniform = 0.0; // n_k = average_tokens in every layer
  double avg_retention_overall = 0.0;
  double kv_fraction = 1.0;
  double prefill_speedup_estimate = 1.0;  // baseline_flops / total_flops
};

CostReport build_report(const TokenSelection& selection, const LayerTokenProfile& profile,
                        const ModelDims& dims, std::size_t n_text_total);

}  // namespace vscan
