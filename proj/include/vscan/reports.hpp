#pragma once

// Text serializations of pipeline results. All writers are deterministic:
// identical inputs give identical bytes.
//
// CSV schemas (header line first):
//   cost_layers.csv        layer,visual_tokens,kv_tokens,flops
//   bias_histogram.csv     layer,row,col,count
//   attention_sums.csv     layer,head,sum
//   attention_sum_mean.csv layer,mean
// Layers are 1-based, heads/rows/cols 0-based.

#include <filesystem>
#include <span>
#include <string>

#include "vscan/analysis.hpp"
#include "vscan/cost_model.hpp"
#include "vscan/encoder_scan.hpp"

namespace vscan {

std::string selection_json(const TokenSelection& selection);
std::string cost_layers_csv(const CostReport& report);
std::string cost_summary_json(const CostReport& report);
std::string bias_histogram_csv(std::span<const BiasHistogram> histograms);
std::string attention_sums_csv(const AttentionSumCurve& curve);
std::string attention_sum_mean_csv(const AttentionSumCurve& curve);

// selection.json plus merged_embeddings.vscn (f64) when merged.
void write_selection(const std::filesystem::path& dir, const TokenSelection& selection);
// cost_layers.csv plus cost_summary.json.
void write_cost_report(const std::filesystem::path& dir, const CostReport& report);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace vscan
